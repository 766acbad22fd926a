"""Minimax-Q learning on Rabin(1) games with Rabin-pair rewards.

Randomness layout.  One ``numpy.random.default_rng(seed)`` stream feeds the
whole run.  Episodes are processed in batches; each batch draws a
``(batch, 1 + 3 * max_steps)`` array of uniforms where, per episode, column 0
picks the start state and step ``t`` uses columns ``1 + 3t`` (exploration
coin), ``2 + 3t`` (random action) and ``3 + 3t`` (successor, by inverse CDF).
The compiled kernel and the pure-Python reference consume the same uniforms,
so both produce bit-identical tables.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .errors import InputError
from .game import CTRL, StochasticGame, Strategy
from .reward import RewardScheme

BATCH_EPISODES = 64
Q_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class LearnParams:
    episodes: int = 1000
    max_steps: int = 1000
    eps_start: float = 0.5
    eps_end: float = 0.05
    alpha_start: float = 0.5
    alpha_end: float = 0.05
    seed: int = 0
    c: float = 0.01
    start: str = "uniform"  # or "initial"
    overlap: str = "c-wins"

    def __post_init__(self):
        if self.episodes < 1 or self.max_steps < 1:
            raise ValueError("episodes and max_steps must be at least 1")
        for name in ("eps_start", "eps_end", "alpha_start", "alpha_end"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.start not in ("uniform", "initial"):
            raise ValueError("start must be 'uniform' or 'initial'")

    def schedule(self, start: float, end: float) -> np.ndarray:
        """Linear per-episode decay from ``start`` to ``end``."""
        if self.episodes == 1:
            return np.array([start])
        return np.linspace(start, end, self.episodes)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "LearnParams":
        return cls(**doc)


@dataclass(eq=False)
class QTable:
    """Q-values and visit counts over the state-action slots of a game."""

    sa_start: np.ndarray
    q: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, g: StochasticGame) -> "QTable":
        arr = g.arrays
        return cls(arr.sa_start.copy(), np.zeros(arr.n_sa), np.zeros(arr.n_sa, dtype=np.int64))

    def row(self, s: int) -> np.ndarray:
        return self.q[self.sa_start[s]:self.sa_start[s + 1]]

    def state_values(self, g: StochasticGame) -> np.ndarray:
        """Max over actions at controller states, min at environment states."""
        return np.array(
            [self.row(s).max() if g.owner[s] == CTRL else self.row(s).min() for s in range(g.n_states)]
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.q.tobytes())
        h.update(self.visits.tobytes())
        return h.hexdigest()

    def to_csv(self, g: StochasticGame) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state_index", "state_meta", "action", "value", "visits"])
        for s in range(g.n_states):
            meta = json.dumps(g.state_meta(s), sort_keys=True)
            for i, name in enumerate(g.actions[s]):
                slot = self.sa_start[s] + i
                w.writerow([s, meta, name, repr(float(self.q[slot])), int(self.visits[slot])])
        return buf.getvalue()


def _greedy(q, lo, hi, maximize):
    best = lo
    for j in range(lo + 1, hi):
        if (q[j] > q[best]) if maximize else (q[j] < q[best]):
            best = j
    return best


def _make_runner(greedy):
    def run(q, visits, is_ctrl, sa_start, tr_start, succ, cum, R, G, eps, alpha, u, uniform_start, initial, steps):
        n = is_ctrl.shape[0]
        for e in range(eps.shape[0]):
            row = u[e]
            if uniform_start:
                s = min(int(row[0] * n), n - 1)
            else:
                s = initial
            for t in range(steps):
                o = 1 + 3 * t
                lo = sa_start[s]
                hi = sa_start[s + 1]
                if row[o] < eps[e]:
                    a = lo + min(int(row[o + 1] * (hi - lo)), hi - lo - 1)
                else:
                    a = greedy(q, lo, hi, is_ctrl[s])
                k = tr_start[a]
                last = tr_start[a + 1] - 1
                x = row[o + 2]
                while k < last and x >= cum[k]:
                    k += 1
                s2 = succ[k]
                v2 = q[greedy(q, sa_start[s2], sa_start[s2 + 1], is_ctrl[s2])]
                q[a] = (1.0 - alpha[e]) * q[a] + alpha[e] * (R[s] + G[s] * v2)
                visits[a] += 1
                s = s2

    return run


_episodes = _make_runner(_greedy)
_episodes_jit = njit(cache=True)(_make_runner(njit(cache=True)(_greedy)))


def check_scheme(g: StochasticGame, scheme: RewardScheme) -> None:
    if g.k != 1:
        raise InputError(f"minimax-Q needs a Rabin(1) game, found {g.k} pairs; build the k-copy game first")
    c, b = g.rabin_pairs[0]
    if scheme.B != b or scheme.C != c:
        raise InputError("reward scheme sets do not match the game's Rabin pair")


def minimax_q(
    g: StochasticGame,
    scheme: RewardScheme,
    p: LearnParams,
    compiled: bool = True,
    q0: QTable | None = None,
) -> QTable:
    """Learn Q by minimax-Q with both players acting epsilon-greedily.

    ``compiled=False`` runs the interpreted reference implementation on the
    same random stream.
    """
    check_scheme(g, scheme)
    arr = g.arrays
    table = q0 if q0 is not None else QTable.zeros(g)
    R, G = scheme.vectors(g.n_states)
    eps_all = p.schedule(p.eps_start, p.eps_end)
    alpha_all = p.schedule(p.alpha_start, p.alpha_end)
    rng = np.random.default_rng(p.seed)
    run = _episodes_jit if compiled else _episodes
    width = 1 + 3 * p.max_steps
    for lo in range(0, p.episodes, BATCH_EPISODES):
        hi = min(lo + BATCH_EPISODES, p.episodes)
        u = rng.random((hi - lo, width))
        run(
            table.q, table.visits, arr.is_ctrl, arr.sa_start, arr.tr_start, arr.succ, arr.cum,
            R, G, eps_all[lo:hi], alpha_all[lo:hi], u, p.start == "uniform", g.initial, p.max_steps,
        )
        # rewards never exceed 1 - gamma_B and discounts stay below 1, so
        # every convex update keeps Q inside [0, 1]
        assert table.q.min() >= -Q_BOUND_SLACK and table.q.max() <= 1.0 + Q_BOUND_SLACK
    return table


def greedy_strategy(q: QTable, g: StochasticGame) -> tuple[Strategy, Strategy]:
    """Controller argmax and environment argmin, ties to the first declared action."""
    if len(q.q) != g.arrays.n_sa or not np.array_equal(q.sa_start, g.arrays.sa_start):
        raise InputError("Q table does not match the game's state-action layout")
    mu, nu = {}, {}
    for s in range(g.n_states):
        lo, hi = int(q.sa_start[s]), int(q.sa_start[s + 1])
        if g.owner[s] == CTRL:
            mu[s] = _greedy(q.q, lo, hi, True) - lo
        else:
            nu[s] = _greedy(q.q, lo, hi, False) - lo
    return mu, nu
