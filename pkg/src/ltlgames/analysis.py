"""Graph and probability analysis of induced Markov chains and MDPs."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from .errors import ConvergenceError
from .game import InducedMc, RabinPair

REACH_TOL = 1e-10
REACH_MAX_ITER = 10**6


def strongly_connected_components(
    nodes: Iterable[int], successors: Callable[[int], Iterable[int]]
) -> list[list[int]]:
    """Tarjan's algorithm without recursion.

    Components come out in reverse topological order: a component is emitted
    only after every component reachable from it.
    """
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def bsccs(mc: InducedMc) -> list[frozenset[int]]:
    """Bottom strongly connected components of ``mc``."""
    succ = [mc.successors(s).tolist() for s in range(mc.n_states)]
    out = []
    for comp in strongly_connected_components(range(mc.n_states), succ.__getitem__):
        members = set(comp)
        if all(t in members for s in comp for t in succ[s]):
            out.append(frozenset(comp))
    return out


def classify_states(
    mc: InducedMc, pair: RabinPair, bottom: Sequence[frozenset[int]] | None = None
) -> tuple[frozenset[int], frozenset[int], frozenset[int]]:
    """Split BSCC states into (U_B, U_C, U_BCbar) for the pair ``(C, B)``.

    U_B: B-states of BSCCs avoiding C.  U_C: C-states of any BSCC.
    U_BCbar: all states of BSCCs meeting neither B nor C.
    """
    c, b = pair
    u_b, u_c, u_none = set(), set(), set()
    for comp in bsccs(mc) if bottom is None else bottom:
        u_c |= comp & c
        if not comp & c:
            if comp & b:
                u_b |= comp & b
            else:
                u_none |= comp
    return frozenset(u_b), frozenset(u_c), frozenset(u_none)


def can_reach(P: sp.csr_matrix, target: Iterable[int]) -> np.ndarray:
    """Boolean mask of states with a positive-probability path into ``target``."""
    n = P.shape[0]
    pred = (P.T.tocsr() > 0).tocsr()
    seen = np.zeros(n, dtype=bool)
    frontier = list(target)
    seen[frontier] = True
    while frontier:
        s = frontier.pop()
        for t in pred.indices[pred.indptr[s]:pred.indptr[s + 1]]:
            if not seen[t]:
                seen[t] = True
                frontier.append(t)
    return seen


def reach_prob(
    mc: InducedMc,
    target: Iterable[int],
    method: str = "direct",
    tol: float = REACH_TOL,
    max_iter: int = REACH_MAX_ITER,
) -> np.ndarray:
    """Probability of eventually reaching ``target`` from every state.

    States that cannot reach the target get exactly 0; the rest solve
    ``x = P x`` with ``x = 1`` on the target, either by a sparse direct solve
    or by iterating the fixed point from 0 until the update is below ``tol``.
    """
    P = mc.P
    n = P.shape[0]
    target = np.fromiter(set(target), dtype=np.int64)
    x = np.zeros(n)
    if target.size == 0:
        return x
    x[target] = 1.0
    maybe = can_reach(P, target)
    maybe[target] = False
    idx = np.flatnonzero(maybe)
    if idx.size == 0:
        return x
    P_mm = P[idx][:, idx]
    b = np.asarray(P[idx][:, target].sum(axis=1)).ravel()
    if method == "direct":
        A = sp.identity(idx.size, format="csc") - P_mm.tocsc()
        sol = spla.spsolve(A, b) if idx.size > 1 else b / A.toarray()[0]
        x[idx] = np.clip(np.atleast_1d(sol), 0.0, 1.0)
        return x
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    y = np.zeros(idx.size)
    for _ in range(max_iter):
        y_new = P_mm @ y + b
        delta = np.max(np.abs(y_new - y))
        y = y_new
        if delta <= tol:
            x[idx] = y
            return x
    raise ConvergenceError("reachability iteration did not converge", float(delta))


def accepting_bsccs(
    bottom: Sequence[frozenset[int]], pairs: Sequence[RabinPair]
) -> list[frozenset[int]]:
    """BSCCs on which some Rabin pair holds (C avoided, B visited)."""
    return [T for T in bottom if any(not (T & c) and (T & b) for c, b in pairs)]


def rabin_probability(mc: InducedMc, pairs: Sequence[RabinPair]) -> np.ndarray:
    """Per-state probability that the run satisfies the Rabin condition ``pairs``."""
    good = set().union(*accepting_bsccs(bsccs(mc), pairs))
    return reach_prob(mc, good)


# ------------------------------------------------------------------ MDPs
#
# An MDP is given as ``choices[s]``: a list of distributions, each a sequence
# of (successor, probability) pairs.  Used with the controller's choices
# already fixed, so the environment resolves all remaining nondeterminism.


def end_components(choices: Sequence[Sequence], subset: Iterable[int]) -> list[frozenset[int]]:
    """Maximal end components of the sub-MDP induced by ``subset``."""
    result = []
    candidates = [set(subset)]
    while candidates:
        U = candidates.pop()
        while True:
            allowed = {
                s: [d for d in choices[s] if all(t in U for t, p in d if p > 0)]
                for s in U
            }
            dead = {s for s, acts in allowed.items() if not acts}
            if not dead:
                break
            U -= dead
        if not U:
            continue
        succ = {s: sorted({t for d in allowed[s] for t, p in d if p > 0}) for s in U}
        comps = strongly_connected_components(sorted(U), succ.__getitem__)
        if len(comps) == 1:
            result.append(frozenset(U))
        else:
            candidates.extend(set(c) for c in comps)
    return result


def streett_end_states(
    choices: Sequence[Sequence], states: Iterable[int], pairs: Sequence[RabinPair]
) -> frozenset[int]:
    """Union of end components on which every Rabin pair fails.

    An end component fails pair (C, B) when it meets C or avoids B; staying in
    it forever while visiting all of its states rejects the Rabin condition.
    """
    good: set[int] = set()
    stack = end_components(choices, states)
    while stack:
        M = stack.pop()
        live = [b for c, b in pairs if (M & b) and not (M & c)]
        if not live:
            good |= M
            continue
        stack.extend(end_components(choices, M - set().union(*live)))
    return frozenset(good)


def max_reach_mdp(choices: Sequence[Sequence], target: Iterable[int]) -> np.ndarray:
    """Maximal probability over all schedulers of reaching ``target``.

    Solved as a linear program; the maximizing choices are then re-evaluated
    exactly on the induced Markov chain.
    """
    n = len(choices)
    target = set(target)
    x = np.zeros(n)
    if not target:
        return x
    rows, cols, vals = [], [], []
    for s in range(n):
        for d in choices[s]:
            for t, p in d:
                rows.append(s)
                cols.append(t)
                vals.append(p)
    graph = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    maybe = can_reach(graph, target)
    maybe[list(target)] = False
    idx = np.flatnonzero(maybe)
    x[list(target)] = 1.0
    if idx.size == 0:
        return x
    pos = {s: i for i, s in enumerate(idx)}
    A_rows, A_cols, A_vals, b_ub = [], [], [], []
    act_rows = []
    for s in idx:
        for d in choices[s]:
            r = len(b_ub)
            act_rows.append((s, d))
            # sum_t p x_t - x_s <= -sum_{t in target} p
            const = 0.0
            coef = {pos[s]: -1.0}
            for t, p in d:
                if t in target:
                    const += p
                elif t in pos:
                    coef[pos[t]] = coef.get(pos[t], 0.0) + p
            for j, v in coef.items():
                A_rows.append(r)
                A_cols.append(j)
                A_vals.append(v)
            b_ub.append(-const)
    A = sp.csr_matrix((A_vals, (A_rows, A_cols)), shape=(len(b_ub), idx.size))
    res = linprog(np.ones(idx.size), A_ub=A, b_ub=np.array(b_ub), bounds=(0.0, 1.0), method="highs")
    if res.status != 0:
        raise ConvergenceError(f"reachability LP failed: {res.message}", float("nan"))
    approx = x.copy()
    approx[idx] = res.x
    # polish: follow the best choice under the LP values and solve exactly;
    # best choices never stay inside a region without progress, except among
    # ties, so prefer choices that strictly move toward the target set.
    return _polish_max_reach(choices, target, idx, approx)


def _polish_max_reach(choices, target, idx, approx) -> np.ndarray:
    n = len(choices)

    def value(d, v):
        return sum(p * v[t] for t, p in d)

    # attractor-style selection: among near-optimal choices, pick one that
    # leads to a state already "settled" closer to the target, so the chosen
    # Markov chain reaches the target whenever the optimum is positive
    settled = set(target)
    choice = {}
    frontier_changed = True
    remaining = set(int(s) for s in idx)
    while remaining and frontier_changed:
        frontier_changed = False
        for s in sorted(remaining):
            best = max(value(d, approx) for d in choices[s])
            for d in choices[s]:
                if value(d, approx) >= best - 1e-7 and any(t in settled and p > 0 for t, p in d):
                    choice[s] = d
                    break
            if s in choice:
                settled.add(s)
                remaining.discard(s)
                frontier_changed = True
    for s in remaining:
        choice[s] = max(choices[s], key=lambda d: value(d, approx))
    rows, cols, vals = [], [], []
    for s in range(n):
        d = choice.get(s, ((s, 1.0),))
        for t, p in d:
            rows.append(s)
            cols.append(t)
            vals.append(p)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    exact = reach_prob(InducedMc(P, (), 0, {}, {}), target)
    # the polished chain can only lose probability when LP ties were broken
    # badly; fall back to the LP value in that case
    return np.where(exact >= approx - 1e-6, exact, approx)
