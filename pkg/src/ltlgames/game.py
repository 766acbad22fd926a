"""Labeled turn-based stochastic games and the Markov chains they induce."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import CoverageError, GameFormatError, ProbabilitySumError

CTRL = "ctrl"
ENV = "env"
PROB_TOL = 1e-9

EPS_PREFIX = "__eps_"
EPS_PRIME = "__eps_prime"

RabinPair = tuple[frozenset[int], frozenset[int]]  # (C, B)
Distribution = tuple[tuple[int, float], ...]
Strategy = dict[int, int]  # state -> index into game.actions[state]


def eps_action(j: int) -> str:
    """Reserved name of the mode-switch action targeting copy ``j`` (1-based)."""
    return f"{EPS_PREFIX}{j}"


def is_reserved_action(name: str) -> bool:
    return name == EPS_PRIME or (
        name.startswith(EPS_PREFIX) and name[len(EPS_PREFIX):].isdigit()
    )


@dataclass(frozen=True, eq=False)
class StochasticGame:
    """A labeled turn-based stochastic game, optionally with Rabin pairs.

    ``transitions[s][i]`` is the successor distribution of ``actions[s][i]``.
    ``meta`` is free-form provenance (grid layout, product/copy coordinates);
    ``meta["states"][s]`` describes state ``s`` when present.
    """

    ap: tuple[str, ...]
    owner: tuple[str, ...]
    labels: tuple[frozenset[str], ...]
    actions: tuple[tuple[str, ...], ...]
    transitions: tuple[tuple[Distribution, ...], ...]
    initial: int = 0
    rabin_pairs: tuple[RabinPair, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.owner)
        if not (len(self.labels) == len(self.actions) == len(self.transitions) == n):
            raise GameFormatError("per-state arrays have different lengths")
        if n == 0:
            raise GameFormatError("game has no states")
        if not 0 <= self.initial < n:
            raise GameFormatError(f"initial state {self.initial} out of range")
        ap = set(self.ap)
        for s in range(n):
            if self.owner[s] not in (CTRL, ENV):
                raise GameFormatError(f"state {s}: owner must be 'ctrl' or 'env'")
            if not self.labels[s] <= ap:
                raise GameFormatError(
                    f"state {s}: label {sorted(self.labels[s] - ap)} not in AP"
                )
            if not self.actions[s]:
                raise GameFormatError(f"state {s} has no actions")
            if len(set(self.actions[s])) != len(self.actions[s]):
                raise GameFormatError(f"state {s} has duplicate action names")
            if len(self.transitions[s]) != len(self.actions[s]):
                raise GameFormatError(f"state {s}: actions and transitions disagree")
            for name, dist in zip(self.actions[s], self.transitions[s]):
                if not dist:
                    raise GameFormatError(f"state {s}, action {name!r}: no successors")
                total = 0.0
                for t, p in dist:
                    if not 0 <= t < n:
                        raise GameFormatError(
                            f"state {s}, action {name!r}: dangling successor {t}"
                        )
                    if not (0.0 <= p <= 1.0) or math.isnan(p):
                        raise GameFormatError(
                            f"state {s}, action {name!r}: probability {p} outside [0, 1]"
                        )
                    total += p
                if abs(total - 1.0) > PROB_TOL:
                    raise ProbabilitySumError(s, name, total)
        for c, b in self.rabin_pairs:
            if any(not 0 <= x < n for x in c | b):
                raise GameFormatError("Rabin pair mentions an unknown state")

    # -- basic queries -------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.owner)

    @property
    def k(self) -> int:
        return len(self.rabin_pairs)

    def is_ctrl(self, s: int) -> bool:
        return self.owner[s] == CTRL

    @cached_property
    def controller_states(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.n_states) if self.owner[s] == CTRL)

    @cached_property
    def environment_states(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.n_states) if self.owner[s] == ENV)

    def action_index(self, s: int, name: str) -> int:
        try:
            return self.actions[s].index(name)
        except ValueError:
            raise KeyError(f"state {s} has no action {name!r}") from None

    def state_meta(self, s: int) -> dict[str, Any]:
        states = self.meta.get("states")
        return dict(states[s]) if states else {}

    def with_pairs(self, pairs) -> "StochasticGame":
        return StochasticGame(
            self.ap, self.owner, self.labels, self.actions, self.transitions,
            self.initial, tuple((frozenset(c), frozenset(b)) for c, b in pairs), self.meta,
        )

    # -- flat arrays for the numeric kernels ---------------------------

    @cached_property
    def arrays(self) -> "GameArrays":
        return GameArrays.from_game(self)

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "ap": list(self.ap),
            "states": [
                {
                    "owner": self.owner[s],
                    "label": sorted(self.labels[s]),
                    "actions": {
                        name: [[t, p] for t, p in dist]
                        for name, dist in zip(self.actions[s], self.transitions[s])
                    },
                }
                for s in range(self.n_states)
            ],
            "initial": self.initial,
            "rabin_pairs": [{"C": sorted(c), "B": sorted(b)} for c, b in self.rabin_pairs],
        }
        if self.meta:
            doc["meta"] = self.meta
        return doc


@dataclass(frozen=True, eq=False)
class GameArrays:
    """CSR-style flattening of a game.

    State ``s`` owns state-action slots ``sa_start[s]:sa_start[s+1]``; slot
    ``j`` has successors ``succ[tr_start[j]:tr_start[j+1]]`` with probabilities
    ``prob[...]`` and running sums ``cum[...]``.
    """

    is_ctrl: np.ndarray
    sa_start: np.ndarray
    sa_state: np.ndarray
    tr_start: np.ndarray
    succ: np.ndarray
    prob: np.ndarray
    cum: np.ndarray

    @classmethod
    def from_game(cls, g: StochasticGame) -> "GameArrays":
        sa_start = [0]
        sa_state, tr_start, succ, prob, cum = [], [0], [], [], []
        for s in range(g.n_states):
            for dist in g.transitions[s]:
                sa_state.append(s)
                acc = 0.0
                for t, p in dist:
                    succ.append(t)
                    prob.append(p)
                    acc += p
                    cum.append(acc)
                tr_start.append(len(succ))
            sa_start.append(len(sa_state))
        return cls(
            is_ctrl=np.array([o == CTRL for o in g.owner], dtype=np.bool_),
            sa_start=np.array(sa_start, dtype=np.int64),
            sa_state=np.array(sa_state, dtype=np.int64),
            tr_start=np.array(tr_start, dtype=np.int64),
            succ=np.array(succ, dtype=np.int64),
            prob=np.array(prob, dtype=np.float64),
            cum=np.array(cum, dtype=np.float64),
        )

    @property
    def n_sa(self) -> int:
        return len(self.sa_state)

    def transition_matrix(self) -> sp.csr_matrix:
        """(state-action slot) x (state) matrix of transition probabilities."""
        n = len(self.is_ctrl)
        rows = np.repeat(np.arange(self.n_sa), np.diff(self.tr_start))
        return sp.csr_matrix((self.prob, (rows, self.succ)), shape=(self.n_sa, n))


def game_from_json(doc: Mapping[str, Any], allow_reserved: bool | None = None) -> StochasticGame:
    """Build a game from the parsed JSON document (see :func:`load_game`)."""
    if not isinstance(doc, Mapping):
        raise GameFormatError("game document must be a JSON object")
    for key in ("ap", "states", "initial"):
        if key not in doc:
            raise GameFormatError(f"missing required key {key!r}")
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise GameFormatError("'meta' must be an object")
    if allow_reserved is None:
        allow_reserved = meta.get("kind") == "kcopy"
    ap = doc["ap"]
    if not isinstance(ap, list) or not all(isinstance(a, str) for a in ap):
        raise GameFormatError("'ap' must be a list of strings")
    states = doc["states"]
    if not isinstance(states, list):
        raise GameFormatError("'states' must be a list")
    owner, labels, actions, transitions = [], [], [], []
    for s, st in enumerate(states):
        if not isinstance(st, dict) or "owner" not in st or "actions" not in st:
            raise GameFormatError(f"state {s}: needs 'owner' and 'actions'")
        owner.append(st["owner"])
        labels.append(frozenset(st.get("label", [])))
        acts = st["actions"]
        if not isinstance(acts, dict):
            raise GameFormatError(f"state {s}: 'actions' must be an object")
        names, dists = [], []
        for name, dist in acts.items():
            if is_reserved_action(name) and not allow_reserved:
                raise GameFormatError(f"state {s}: action name {name!r} is reserved")
            try:
                dists.append(tuple((int(t), float(p)) for t, p in dist))
            except (TypeError, ValueError):
                raise GameFormatError(
                    f"state {s}, action {name!r}: expected [[successor, probability], ...]"
                ) from None
            names.append(name)
        actions.append(tuple(names))
        transitions.append(tuple(dists))
    pairs = []
    for pair in doc.get("rabin_pairs", []):
        try:
            pairs.append((frozenset(int(x) for x in pair["C"]), frozenset(int(x) for x in pair["B"])))
        except (KeyError, TypeError, ValueError):
            raise GameFormatError("each Rabin pair needs integer lists 'C' and 'B'") from None
    if not isinstance(doc["initial"], int):
        raise GameFormatError("'initial' must be an integer")
    return StochasticGame(
        tuple(ap), tuple(owner), tuple(labels), tuple(actions), tuple(transitions),
        doc["initial"], tuple(pairs), meta,
    )


def load_game(text: str, allow_reserved: bool | None = None) -> StochasticGame:
    """Parse and validate a game file.

    Reserved mode-switch action names are only accepted in documents whose
    ``meta.kind`` is ``"kcopy"`` unless ``allow_reserved`` says otherwise.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"invalid JSON: {exc}") from None
    return game_from_json(doc, allow_reserved)


def dump_game(g: StochasticGame) -> str:
    return json.dumps(g.to_json(), separators=(",", ":")) + "\n"


def read_game(path) -> StochasticGame:
    with open(path, encoding="utf-8") as fh:
        return load_game(fh.read())


def write_game(g: StochasticGame, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_game(g))


# ------------------------------------------------------------ strategies


def check_strategy(g: StochasticGame, strategy: Mapping[int, int], owner: str) -> None:
    """Raise :class:`CoverageError` unless ``strategy`` covers exactly ``owner``'s states."""
    expected = set(g.controller_states if owner == CTRL else g.environment_states)
    got = set(strategy)
    if got != expected:
        extra, missing = sorted(got - expected), sorted(expected - got)
        raise CoverageError(
            f"{owner} strategy must cover exactly the {owner} states"
            + (f"; foreign states {extra[:5]}" if extra else "")
            + (f"; missing states {missing[:5]}" if missing else "")
        )
    for s, a in strategy.items():
        if not 0 <= a < len(g.actions[s]):
            raise CoverageError(f"state {s}: action index {a} out of range")


def strategy_by_name(g: StochasticGame, choice: Mapping[int, str]) -> Strategy:
    return {s: g.action_index(s, name) for s, name in choice.items()}


def first_action_strategy(g: StochasticGame, owner: str) -> Strategy:
    states = g.controller_states if owner == CTRL else g.environment_states
    return {s: 0 for s in states}


@dataclass(frozen=True, eq=False)
class InducedMc:
    """The Markov chain obtained by fixing one pure memoryless strategy per player."""

    P: sp.csr_matrix
    labels: tuple[frozenset[str], ...]
    initial: int
    mu: Strategy
    nu: Strategy

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def successors(self, s: int) -> np.ndarray:
        lo, hi = self.P.indptr[s], self.P.indptr[s + 1]
        idx = self.P.indices[lo:hi]
        return idx[self.P.data[lo:hi] > 0]


def chosen_slots(g: StochasticGame, mu: Mapping[int, int], nu: Mapping[int, int]) -> np.ndarray:
    arr = g.arrays
    choice = np.empty(g.n_states, dtype=np.int64)
    for s in range(g.n_states):
        choice[s] = (mu if g.owner[s] == CTRL else nu)[s]
    return arr.sa_start[:-1] + choice


def induce_mc(g: StochasticGame, mu: Mapping[int, int], nu: Mapping[int, int]) -> InducedMc:
    """Fix ``mu`` on controller states and ``nu`` on environment states."""
    check_strategy(g, mu, CTRL)
    check_strategy(g, nu, ENV)
    return mc_from_slots(g, chosen_slots(g, mu, nu), dict(mu), dict(nu))


def mc_from_slots(g: StochasticGame, slots: np.ndarray, mu=None, nu=None) -> InducedMc:
    arr = g.arrays
    starts, ends = arr.tr_start[slots], arr.tr_start[slots + 1]
    counts = ends - starts
    idx = np.concatenate([np.arange(a, b) for a, b in zip(starts, ends)])
    rows = np.repeat(np.arange(g.n_states), counts)
    P = sp.csr_matrix((arr.prob[idx], (rows, arr.succ[idx])), shape=(g.n_states, g.n_states))
    return InducedMc(P, g.labels, g.initial, mu or {}, nu or {})
