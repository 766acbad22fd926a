"""Shared builders for tests: compact game construction and random games."""

from __future__ import annotations

from importlib import resources

from hypothesis import strategies as st

from ltlgames.automata import load_hoa
from ltlgames.game import CTRL, ENV, StochasticGame, read_game

FIXTURES = resources.files("ltlgames") / "fixtures"


def fixture(name: str):
    return FIXTURES / name


def load_fixture_game(name: str) -> StochasticGame:
    return read_game(fixture(name))


def load_fixture_dra(name: str):
    return load_hoa(fixture(name))


def make_game(owner, moves, pairs=(), labels=None, ap=(), initial=0) -> StochasticGame:
    """``owner`` is a string like "cec" (c = controller); ``moves[s]`` maps action name to
    a successor index or a list of (successor, probability)."""
    n = len(owner)
    actions, transitions = [], []
    for s in range(n):
        names, dists = [], []
        for name, dist in moves[s].items():
            if isinstance(dist, int):
                dist = [(dist, 1.0)]
            names.append(name)
            dists.append(tuple((int(t), float(p)) for t, p in dist))
        actions.append(tuple(names))
        transitions.append(tuple(dists))
    labels = labels or [()] * n
    return StochasticGame(
        ap=tuple(ap),
        owner=tuple(CTRL if o == "c" else ENV for o in owner),
        labels=tuple(frozenset(x) for x in labels),
        actions=tuple(actions),
        transitions=tuple(transitions),
        initial=initial,
        rabin_pairs=tuple((frozenset(c), frozenset(b)) for c, b in pairs),
    )


_SPLITS = [(1.0,), (0.5, 0.5), (0.25, 0.75), (0.1, 0.9), (0.2, 0.3, 0.5)]


@st.composite
def random_games(draw, min_states=1, max_states=5, max_actions=2, k=1, ap=("p", "q")):
    """Small random turn-based games with ``k`` random Rabin pairs."""
    n = draw(st.integers(min_states, max_states))
    owner = "".join(draw(st.sampled_from("ce")) for _ in range(n))
    moves = []
    for _ in range(n):
        acts = {}
        for a in range(draw(st.integers(1, max_actions))):
            split = draw(st.sampled_from(_SPLITS))
            succ = [draw(st.integers(0, n - 1)) for _ in split]
            acts[f"a{a}"] = list(zip(succ, split))
        moves.append(acts)
    subsets = st.frozensets(st.integers(0, n - 1), max_size=n)
    pairs = [(draw(subsets), draw(subsets)) for _ in range(k)]
    labels = [draw(st.frozensets(st.sampled_from(ap))) for _ in range(n)]
    return make_game(owner, moves, pairs, labels, ap)
