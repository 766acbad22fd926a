"""Exact model-based ground truth for small games.

Two independent routes are provided for worst-case satisfaction
probabilities: enumeration of pure memoryless strategy pairs (bottom-SCC
classification plus reachability on every induced chain) and an
end-component analysis of the MDP left once the controller is fixed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analysis import (
    classify_states,
    max_reach_mdp,
    reach_prob,
    streett_end_states,
)
from .errors import CapExceededError, InputError
from .game import CTRL, ENV, RabinPair, StochasticGame, Strategy, chosen_slots, mc_from_slots
from .reward import RewardScheme
from .synthesis import FiniteMemoryStrategy

DEFAULT_CAP = 10**6
WIN_TOL = 1e-9
_TIE = 1e-12


@dataclass(frozen=True, eq=False)
class OracleResult:
    values: np.ndarray
    mu: Strategy
    nu: Strategy
    method: str  # "enumeration" | "value-iteration"
    residual: float = 0.0


def strategy_count(g: StochasticGame, owner: str) -> int:
    states = g.controller_states if owner == CTRL else g.environment_states
    return math.prod(len(g.actions[s]) for s in states)


def iter_strategies(g: StochasticGame, owner: str) -> Iterator[Strategy]:
    """Pure memoryless strategies in lexicographic (state, action index) order."""
    states = g.controller_states if owner == CTRL else g.environment_states
    for combo in itertools.product(*(range(len(g.actions[s])) for s in states)):
        yield dict(zip(states, combo))


def _single_pair(g: StochasticGame) -> RabinPair:
    if g.k != 1:
        raise InputError(f"expected a Rabin(1) game, found {g.k} pairs")
    return g.rabin_pairs[0]


def pair_probability(g: StochasticGame, mu: Strategy, nu: Strategy, pair: RabinPair | None = None):
    """Probability of the Rabin(1) condition under (mu, nu), via reachability of U_B."""
    pair = _single_pair(g) if pair is None else pair
    mc = mc_from_slots(g, chosen_slots(g, mu, nu), mu, nu)
    u_b, _, _ = classify_states(mc, pair)
    return reach_prob(mc, u_b)


def _check_cap(count: int, cap: int, what: str):
    if count > cap:
        raise CapExceededError(
            f"{what}: {count} pure memoryless strategy combinations exceed the cap of {cap}; "
            "use the value-iteration oracle (discounted_minimax_vi with small c) instead"
        )


def _maximin_by_enumeration(g: StochasticGame, pair_value, cap: int) -> OracleResult:
    n_mu, n_nu = strategy_count(g, CTRL), strategy_count(g, ENV)
    _check_cap(n_mu * n_nu, cap, "enumeration")
    table = []
    for mu in iter_strategies(g, CTRL):
        worst = None
        rows = []
        for nu in iter_strategies(g, ENV):
            v = pair_value(mu, nu)
            rows.append((nu, v))
            worst = v if worst is None else np.minimum(worst, v)
        table.append((mu, worst, rows))
    best = np.max(np.stack([w for _, w, _ in table]), axis=0)
    chosen = next(
        (t for t in table if np.all(t[1] >= best - _TIE)),
        max(table, key=lambda t: t[1][g.initial]),
    )
    mu, worst, rows = chosen
    nu = next(
        (nu for nu, v in rows if np.all(v <= worst + _TIE)),
        min(rows, key=lambda r: r[1][g.initial])[0],
    )
    return OracleResult(best, mu, nu, "enumeration")


def enumerate_maximin(g: StochasticGame, cap: int = DEFAULT_CAP) -> OracleResult:
    """Per-state max over controller of min over environment of Pr(Rabin(1) pair)."""
    pair = _single_pair(g)
    return _maximin_by_enumeration(g, lambda mu, nu: pair_probability(g, mu, nu, pair), cap)


def maximin_reach(g: StochasticGame, target: Iterable[int], cap: int = DEFAULT_CAP) -> OracleResult:
    """Per-state maximin probability of eventually reaching ``target``."""
    target = frozenset(target)

    def value(mu, nu):
        return reach_prob(mc_from_slots(g, chosen_slots(g, mu, nu)), target)

    return _maximin_by_enumeration(g, value, cap)


def winning_set(g: StochasticGame, j: int, cap: int = DEFAULT_CAP) -> frozenset[int]:
    """States from which pair ``j`` (0-based) alone is won with probability 1."""
    res = enumerate_maximin(g.with_pairs([g.rabin_pairs[j]]), cap)
    return frozenset(int(s) for s in np.flatnonzero(res.values >= 1.0 - WIN_TOL))


def evaluate_strategy(g: StochasticGame, mu: Strategy, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Worst case over pure memoryless environments of Pr(Rabin(1) pair) under ``mu``."""
    pair = _single_pair(g)
    _check_cap(strategy_count(g, ENV), cap, "environment enumeration")
    worst = None
    for nu in iter_strategies(g, ENV):
        v = pair_probability(g, mu, nu, pair)
        worst = v if worst is None else np.minimum(worst, v)
    return worst


# ------------------------------------------------- end-component evaluation


def _memory_mdp(g: StochasticGame, strategy):
    """MDP over (state, mode) with the controller fixed; index s * k + (mode - 1)."""
    if isinstance(strategy, FiniteMemoryStrategy):
        k = strategy.k
    else:
        k = 1
    choices: list[list] = []
    for s in range(g.n_states):
        for mode in range(1, k + 1):
            if g.owner[s] == CTRL:
                if isinstance(strategy, FiniteMemoryStrategy):
                    new_mode, a = strategy.resolve(s, mode)
                else:
                    new_mode, a = mode, strategy[s]
                dist = g.transitions[s][a]
                choices.append([tuple((t * k + new_mode - 1, p) for t, p in dist)])
            else:
                choices.append(
                    [tuple((t * k + mode - 1, p) for t, p in dist) for dist in g.transitions[s]]
                )
    pairs = [
        (
            frozenset(s * k + m for s in c for m in range(k)),
            frozenset(s * k + m for s in b for m in range(k)),
        )
        for c, b in g.rabin_pairs
    ]
    return choices, pairs, k


def worst_case_probability(g: StochasticGame, strategy, pairs: Sequence[RabinPair] | None = None) -> np.ndarray:
    """Exact minimum over all environment strategies of Pr(Rabin condition).

    ``strategy`` is a memoryless controller strategy or a
    :class:`FiniteMemoryStrategy`; values are per state, starting in the
    strategy's initial mode.  The environment may use memory and randomness:
    it wins on every end component that fails all pairs, so the result is one
    minus its maximal probability of reaching such a component.
    """
    if pairs is not None:
        g = g.with_pairs(pairs)
    if g.k < 1:
        raise InputError("game has no Rabin pairs")
    choices, lifted, k = _memory_mdp(g, strategy)
    env_wins = streett_end_states(choices, range(len(choices)), lifted)
    values = 1.0 - max_reach_mdp(choices, env_wins)
    mode = strategy.initial_mode if isinstance(strategy, FiniteMemoryStrategy) else 1
    return np.clip(values[mode - 1 :: k], 0.0, 1.0)


def exact_maximin(g: StochasticGame, cap: int = DEFAULT_CAP) -> OracleResult:
    """Maximin Pr(Rabin(k)) over pure memoryless controllers against arbitrary environments.

    Pure memoryless controller strategies are sufficient for Rabin
    objectives, so this is the exact value for any k.
    """
    _check_cap(strategy_count(g, CTRL), cap, "controller enumeration")
    best, best_mu = None, None
    table = []
    for mu in iter_strategies(g, CTRL):
        v = worst_case_probability(g, mu)
        table.append((mu, v))
        best = v if best is None else np.maximum(best, v)
    best_mu = next((mu for mu, v in table if np.all(v >= best - 1e-9)), table[0][0])
    return OracleResult(best, best_mu, {}, "enumeration")


# ----------------------------------------------------- discounted values


def _policy_matrix(g: StochasticGame, slots: np.ndarray) -> sp.csr_matrix:
    return mc_from_slots(g, slots).P


def _evaluate(g, slots, R, Gm) -> np.ndarray:
    P = _policy_matrix(g, slots)
    A = sp.identity(g.n_states, format="csc") - sp.diags(Gm) @ P
    return np.atleast_1d(spla.spsolve(A.tocsc(), R))


def fixed_pair_values(g: StochasticGame, scheme: RewardScheme, mu: Strategy, nu: Strategy) -> np.ndarray:
    """Expected discounted return of every state under the fixed pair (mu, nu)."""
    R, Gm = scheme.vectors(g.n_states)
    return _evaluate(g, chosen_slots(g, mu, nu), R, Gm)


def _q_values(g, v, R, Gm, T):
    s_of = g.arrays.sa_state
    return R[s_of] + Gm[s_of] * (T @ v)


def _improve(g, q, slots, states, maximize) -> bool:
    start = g.arrays.sa_start
    changed = False
    for s in states:
        lo, hi = start[s], start[s + 1]
        row = q[lo:hi]
        best = int(np.argmax(row) if maximize else np.argmin(row))
        cur = slots[s] - lo
        gain = row[best] - row[cur] if maximize else row[cur] - row[best]
        if gain > _TIE:
            slots[s] = lo + best
            changed = True
    return changed


def discounted_minimax_vi(
    g: StochasticGame, scheme: RewardScheme, tol: float = 1e-10, max_rounds: int | None = None
) -> OracleResult:
    """Optimal values of the discounted zero-sum game with the Rabin rewards.

    Solves ``v(s) = R(s) + Gamma(s) * (max|min)_a sum_s' P(s,a,s') v(s')`` by
    strategy iteration: each controller strategy is answered by the
    environment's optimal response (itself found by policy iteration), with
    every evaluation an exact sparse linear solve.  Plain value iteration is
    hopeless here because the contraction factor is ``1 - c**3``.
    """
    n = g.n_states
    R, Gm = scheme.vectors(n)
    T = g.arrays.transition_matrix()
    slots = g.arrays.sa_start[:-1].copy()
    ctrl, env = g.controller_states, g.environment_states
    max_rounds = max_rounds or 10 * n + 100
    v = np.zeros(n)
    for _ in range(max_rounds):
        for _ in range(max_rounds):
            v = _evaluate(g, slots, R, Gm)
            if not _improve(g, _q_values(g, v, R, Gm, T), slots, env, maximize=False):
                break
        if not _improve(g, _q_values(g, v, R, Gm, T), slots, ctrl, maximize=True):
            break
    q = _q_values(g, v, R, Gm, T)
    start = g.arrays.sa_start
    backed = np.array(
        [
            (q[start[s]:start[s + 1]].max() if g.owner[s] == CTRL else q[start[s]:start[s + 1]].min())
            for s in range(n)
        ]
    )
    residual = float(np.max(np.abs(backed - v)))
    mu = {s: int(slots[s] - start[s]) for s in ctrl}
    nu = {s: int(slots[s] - start[s]) for s in env}
    return OracleResult(v, mu, nu, "value-iteration", residual)
