import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from helpers import load_fixture_game, make_game, random_games
from ltlgames.analysis import classify_states
from ltlgames.errors import CapExceededError, InputError
from ltlgames.game import CTRL, ENV, induce_mc
from ltlgames.oracle import (
    discounted_minimax_vi,
    enumerate_maximin,
    evaluate_strategy,
    exact_maximin,
    fixed_pair_values,
    iter_strategies,
    pair_probability,
    winning_set,
    worst_case_probability,
)
from ltlgames.reward import RewardScheme
from ltlgames.synthesis import build_kcopy, induce_strategy

# maximin values worked out by hand from the fixture structure
HAND_VALUES = {
    # s0 prefers the 0.7 gamble; s1 answers "direct" with the 0.4 split
    "gamble4.game.json": [0.7, 0.4, 1.0, 0.0],
    # s1 leaks to the dead end with 0.2; the right branch traps the run in C
    "mixed7.game.json": [0.8, 0.8, 1.0, 0.0, 0.0, 0.0, 1.0],
    # v0 = 0.6 * 0.5 + 0.4 * v0 through the retry loop
    "chain7.game.json": [0.5, 0.5, 0.5, 0.0, 1.0, 0.0, 1.0],
}
RABIN1_FIXTURES = sorted(HAND_VALUES)


def fixture_games():
    games = {name: load_fixture_game(name) for name in RABIN1_FIXTURES}
    games["fig3-kcopy"] = build_kcopy(load_fixture_game("fig3.game.json"))
    return games


def b_loop():
    return make_game("c", [{"stay": 0}], pairs=[((), (0,))])


def c_loop():
    return make_game("c", [{"stay": 0}], pairs=[((0,), ())])


# ------------------------------------------------------- enumeration


def test_b_loop_is_won():
    assert enumerate_maximin(b_loop()).values.tolist() == [1.0]


def test_fig3_first_pair_alone_is_lost():
    g = load_fixture_game("fig3.game.json")
    res = enumerate_maximin(g.with_pairs([g.rabin_pairs[0]]))
    assert res.values.tolist() == [0.0, 0.0, 0.0]
    assert res.method == "enumeration"


def test_fig3_kcopy_values():
    kg = build_kcopy(load_fixture_game("fig3.game.json"))
    res = enumerate_maximin(kg)
    # every live copy can be starved of its pair by a copy-aware environment
    assert np.array_equal(res.values, np.zeros(10))


@pytest.mark.parametrize("name", RABIN1_FIXTURES)
def test_fixture_maximin_matches_hand_values(name):
    res = enumerate_maximin(load_fixture_game(name))
    assert np.allclose(res.values, HAND_VALUES[name], atol=1e-12)


@pytest.mark.parametrize("name", RABIN1_FIXTURES + ["fig3-kcopy"])
def test_reported_pair_reproduces_values(name):
    g = fixture_games()[name]
    res = enumerate_maximin(g)
    assert np.allclose(pair_probability(g, res.mu, res.nu), res.values, atol=1e-12)


def test_enumeration_requires_one_pair():
    with pytest.raises(InputError):
        enumerate_maximin(load_fixture_game("fig3.game.json"))


def test_cap_exceeded_points_to_value_iteration():
    with pytest.raises(CapExceededError, match="value-iteration"):
        enumerate_maximin(load_fixture_game("mixed7.game.json"), cap=3)


# --------------------------------------------------------- winning sets


def test_all_b_game_wins_everywhere():
    g = make_game("ce", [{"x": 1, "y": 0}, {"z": 0}], pairs=[((), (0, 1))])
    assert winning_set(g, 0) == {0, 1}


def test_fig3_winning_sets_empty():
    g = load_fixture_game("fig3.game.json")
    assert winning_set(g, 0) == frozenset()
    assert winning_set(g, 1) == frozenset()


# ------------------------------------------------ strategy evaluation


@pytest.mark.parametrize("name", RABIN1_FIXTURES + ["fig3-kcopy"])
def test_minimax_inequality_and_optimal_strategy(name):
    g = fixture_games()[name]
    best = enumerate_maximin(g)
    assert np.allclose(evaluate_strategy(g, best.mu), best.values, atol=1e-12)
    for mu in iter_strategies(g, CTRL):
        assert np.all(evaluate_strategy(g, mu) <= best.values + 1e-12)


def test_worst_controller_on_fig3_kcopy():
    kg = build_kcopy(load_fixture_game("fig3.game.json"))
    best = enumerate_maximin(kg).values
    worst_mu = min(iter_strategies(kg, CTRL), key=lambda mu: evaluate_strategy(kg, mu).sum())
    assert np.all(evaluate_strategy(kg, worst_mu) <= best + 1e-12)


@settings(max_examples=150, deadline=None)
@given(random_games(max_states=5, max_actions=2))
def test_end_component_evaluation_matches_enumeration(g):
    for mu in itertools.islice(iter_strategies(g, CTRL), 4):
        assert np.allclose(worst_case_probability(g, mu), evaluate_strategy(g, mu), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(random_games(max_states=5, max_actions=2))
def test_exact_maximin_matches_enumeration_on_one_pair(g):
    assert np.allclose(exact_maximin(g).values, enumerate_maximin(g).values, atol=1e-9)


def test_finite_memory_strategy_on_fig3_wins_surely():
    g = load_fixture_game("fig3.game.json")
    kg = build_kcopy(g)
    fms = induce_strategy(kg, enumerate_maximin(kg).mu)
    assert np.allclose(worst_case_probability(g, fms), 1.0, atol=1e-9)


# ------------------------------------------------- discounted values


def test_vi_on_b_loop_is_one():
    res = discounted_minimax_vi(b_loop(), RewardScheme.for_pair(b_loop().rabin_pairs[0], c=0.1))
    assert res.values[0] == pytest.approx(1.0, abs=1e-12)
    assert res.method == "value-iteration"


def test_vi_on_c_loop_is_zero():
    res = discounted_minimax_vi(c_loop(), RewardScheme.for_pair(c_loop().rabin_pairs[0], c=0.1))
    assert res.values[0] == 0.0


@pytest.mark.parametrize("name", RABIN1_FIXTURES + ["fig3-kcopy"])
def test_vi_approaches_maximin_as_c_shrinks(name):
    g = fixture_games()[name]
    target = enumerate_maximin(g).values
    gaps = []
    for c in (0.1, 0.01, 0.001):
        res = discounted_minimax_vi(g, RewardScheme.for_pair(g.rabin_pairs[0], c=c))
        assert res.residual <= 1e-10
        gaps.append(np.max(np.abs(res.values - target)))
    assert gaps[0] > gaps[1] > gaps[2] or gaps[0] == gaps[1] == gaps[2] == 0.0
    assert gaps[2] <= 0.02


def best_pure_discounted(g, scheme):
    values = None
    for mu in iter_strategies(g, CTRL):
        worst = None
        for nu in iter_strategies(g, ENV):
            v = fixed_pair_values(g, scheme, mu, nu)
            worst = v if worst is None else np.minimum(worst, v)
        values = worst if values is None else np.maximum(values, worst)
    return values


@settings(max_examples=100, deadline=None)
@given(random_games(max_states=5, max_actions=2))
def test_vi_matches_brute_force_over_pure_strategies(g):
    scheme = RewardScheme.for_pair(g.rabin_pairs[0], c=0.2)
    res = discounted_minimax_vi(g, scheme)
    assert np.allclose(res.values, best_pure_discounted(g, scheme), atol=1e-9)
    assert np.allclose(fixed_pair_values(g, scheme, res.mu, res.nu), res.values, atol=1e-12)


@pytest.mark.parametrize("name", RABIN1_FIXTURES + ["fig3-kcopy"])
def test_fixed_pair_values_separate_accepting_bsccs(name):
    g = fixture_games()[name]
    pair = g.rabin_pairs[0]
    scheme = RewardScheme.for_pair(pair, c=0.001)
    for mu in iter_strategies(g, CTRL):
        for nu in iter_strategies(g, ENV):
            u_b, u_c, u_none = classify_states(induce_mc(g, mu, nu), pair)
            v = fixed_pair_values(g, scheme, mu, nu)
            assert all(v[s] >= 0.99 for s in u_b)
            assert all(v[s] <= 0.01 for s in u_c | u_none)
