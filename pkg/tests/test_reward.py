import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltlgames.reward import RewardScheme, path_return, path_returns

B_STATE, C_STATE, PLAIN, BOTH = 0, 1, 2, 3


def scheme(c, overlap="c-wins"):
    return RewardScheme(c, B=frozenset({B_STATE, BOTH}), C=frozenset({C_STATE, BOTH}), overlap=overlap)


def test_reward_on_b_at_case_study_c():
    assert scheme(0.01).reward(B_STATE) == pytest.approx(1e-4, rel=1e-9)


def test_no_reward_off_b():
    assert scheme(0.01).reward(PLAIN) == 0.0
    assert scheme(0.01).reward(C_STATE) == 0.0


def test_reward_on_b_at_half():
    assert scheme(0.5).reward(B_STATE) == 0.25


def test_discounts_at_case_study_c():
    s = scheme(0.01)
    assert s.discount(C_STATE) == pytest.approx(0.99, abs=1e-15)
    assert s.discount(PLAIN) == pytest.approx(0.999999, abs=1e-15)
    assert s.discount(B_STATE) == pytest.approx(0.9999, abs=1e-15)


def test_overlap_policies():
    assert scheme(0.5).discount(BOTH) == 0.5 and scheme(0.5).reward(BOTH) == 0.0
    assert scheme(0.5, "b-wins").discount(BOTH) == 0.75
    assert scheme(0.5, "b-wins").reward(BOTH) == 0.25
    with pytest.raises(ValueError):
        scheme(0.5, "error")


@pytest.mark.parametrize("c", [0.0, 1.0, -0.1, 2.0])
def test_c_must_be_in_open_unit_interval(c):
    with pytest.raises(ValueError):
        scheme(c)


@pytest.mark.parametrize("c", [0.5, 0.1, 0.01, 0.001])
def test_discount_ordering_and_ratios(c):
    s = scheme(c)
    assert 0 < s.gamma_c < s.gamma_b < s.gamma < 1
    assert (1 - s.gamma) / (1 - s.gamma_b) == pytest.approx(c, rel=1e-6)
    assert (1 - s.gamma_b) / (1 - s.gamma_c) == pytest.approx(c, rel=1e-9)


def test_plain_path_returns_zero():
    assert path_return(scheme(0.1), [PLAIN, C_STATE, PLAIN]) == 0.0


@pytest.mark.parametrize("n", [1, 2, 7, 50])
def test_repeated_b_is_geometric(n):
    s = scheme(0.3)
    assert path_return(s, [B_STATE] * n) == pytest.approx(1 - s.gamma_b**n, abs=1e-15)


def test_c_then_b_at_half():
    assert path_return(scheme(0.5), [C_STATE, B_STATE]) == 0.125


def test_empty_path_rejected():
    with pytest.raises(ValueError):
        path_return(scheme(0.5), [])


def forward_sum(s, states):
    """Sum of rewards weighted by the product of earlier discounts."""
    total, weight = 0.0, 1.0
    for x in states:
        total += s.reward(x) * weight
        weight *= s.discount(x)
    return total


paths = st.lists(st.sampled_from([B_STATE, C_STATE, PLAIN, BOTH]), min_size=1, max_size=60)
cs = st.sampled_from([0.5, 0.1, 0.01, 0.001])


@given(cs, paths)
def test_backward_accumulation_matches_forward_sum(c, path):
    s = scheme(c)
    assert path_return(s, path) == pytest.approx(forward_sum(s, path), abs=1e-12)


@given(cs, paths)
def test_return_recursion_is_exact(c, path):
    s = scheme(c)
    g = path_returns(s, path)
    for t, x in enumerate(path):
        rest = g[t + 1]
        if s.reward(x):
            expected = 1 - s.gamma_b + s.gamma_b * rest
        elif x in s.C:
            expected = s.gamma_c * rest
        else:
            expected = s.gamma * rest
        assert g[t] == expected
    assert g[0] == path_return(s, path)


def check_return_bounds(s, path, tol=1e-12):
    g = path_returns(s, path)
    for t in range(len(path)):
        now, nxt = g[t], g[t + 1]
        assert -tol <= now <= 1 + tol
        assert s.gamma_c * nxt <= s.gamma * nxt + tol
        assert s.gamma * nxt <= now + tol or path[t] in s.C
        assert s.gamma_c * nxt <= now + tol
        assert now <= 1 - s.gamma_b + s.gamma_b * nxt + tol


@given(cs, paths)
def test_return_bounds_hold_on_random_paths(c, path):
    check_return_bounds(scheme(c), path)


def test_return_bounds_on_many_paths():
    rng = random.Random(3)
    s = scheme(0.01)
    for _ in range(2000):
        path = [rng.choice([B_STATE, C_STATE, PLAIN, BOTH]) for _ in range(rng.randint(1, 40))]
        check_return_bounds(s, path)


def test_describe_lists_all_discounts():
    d = scheme(0.1).describe()
    assert set(d) == {"c", "gamma", "gamma_B", "gamma_C", "overlap"}
