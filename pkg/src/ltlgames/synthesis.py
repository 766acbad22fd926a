"""Product with a Rabin automaton, the k-copy reduction, and strategy translation."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Any, Mapping

from .automata import Dra
from .errors import AlphabetMismatchError, EpsilonCycleError, GameFormatError, InputError
from .game import (
    CTRL,
    ENV,
    EPS_PREFIX,
    EPS_PRIME,
    StochasticGame,
    Strategy,
    check_strategy,
    eps_action,
    is_reserved_action,
)


def _carried_meta(g: StochasticGame) -> dict[str, Any]:
    return {key: value for key, value in g.meta.items() if key != "states"}


def build_product(g: StochasticGame, a: Dra, prune: bool = True) -> StochasticGame:
    """Synchronous product of ``g`` with ``a``.

    State ``<s, q>`` moves to ``<s', delta(q, L(s))>`` with probability
    ``P(s, a, s')``.  With ``prune`` only states reachable from
    ``<s0, q0>`` are kept, numbered in breadth-first discovery order;
    otherwise ``<s, q>`` gets index ``s * |Q| + q``.
    """
    missing = set(a.ap) - set(g.ap)
    if missing:
        raise AlphabetMismatchError(
            f"automaton propositions {sorted(missing)} are not in the game's AP {list(g.ap)}"
        )
    nq = a.n_states
    next_q = [[a.step(q, g.labels[s]) for q in range(nq)] for s in range(g.n_states)]

    if prune:
        index: dict[tuple[int, int], int] = {}
        order: list[tuple[int, int]] = []
        start = (g.initial, a.initial)
        index[start] = 0
        order.append(start)
        queue = deque([start])
        while queue:
            s, q = queue.popleft()
            q2 = next_q[s][q]
            for dist in g.transitions[s]:
                for t, _ in dist:
                    if (t, q2) not in index:
                        index[(t, q2)] = len(order)
                        order.append((t, q2))
                        queue.append((t, q2))
    else:
        order = [(s, q) for s in range(g.n_states) for q in range(nq)]
        index = {sq: i for i, sq in enumerate(order)}

    transitions = []
    for s, q in order:
        q2 = next_q[s][q]
        transitions.append(
            tuple(tuple((index[(t, q2)], p) for t, p in dist) for dist in g.transitions[s])
        )
    pairs = tuple(
        (
            frozenset(i for i, (_, q) in enumerate(order) if q in c),
            frozenset(i for i, (_, q) in enumerate(order) if q in b),
        )
        for c, b in a.pairs
    )
    meta = _carried_meta(g)
    meta.update(kind="product", k=a.k, dra_states=nq, pruned=prune)
    meta["states"] = [
        {**g.state_meta(s), "game_state": s, "dra_state": q} for s, q in order
    ]
    return StochasticGame(
        ap=g.ap,
        owner=tuple(g.owner[s] for s, _ in order),
        labels=tuple(g.labels[s] for s, _ in order),
        actions=tuple(g.actions[s] for s, _ in order),
        transitions=tuple(transitions),
        initial=0 if prune else index[(g.initial, a.initial)],
        rabin_pairs=pairs,
        meta=meta,
    )


def build_kcopy(g: StochasticGame) -> StochasticGame:
    """Reduce a Rabin(k) game to a Rabin(1) game over k linked copies.

    Live copy ``i`` (1..k) holds every state of ``g`` and judges pair ``i``.
    Each controller state additionally gets actions ``__eps_j`` leading to the
    environment-owned dummy ``<s, k+j>``, whose only action ``__eps_prime``
    returns to ``<s, j>``.  Dummies are all in the single C set.

    State numbering: ``<s, i>`` for live copies is ``(i-1) * |S| + s``; the
    dummies follow, copy by copy, in controller-state order.
    """
    k = g.k
    if k < 1:
        raise InputError("k-copy construction needs a game with Rabin pairs")
    for s in range(g.n_states):
        for name in g.actions[s]:
            if is_reserved_action(name):
                raise GameFormatError(f"state {s}: action name {name!r} is reserved")
    n = g.n_states
    ctrl = g.controller_states
    dummy_index = {}
    for j in range(1, k + 1):
        for s in ctrl:
            dummy_index[(s, j)] = k * n + len(dummy_index)

    owner, labels, actions, transitions, metas = [], [], [], [], []
    c_star, b_star = set(), set()
    for i in range(1, k + 1):
        c_i, b_i = g.rabin_pairs[i - 1]
        offset = (i - 1) * n
        for s in range(n):
            owner.append(g.owner[s])
            labels.append(g.labels[s])
            acts = list(g.actions[s])
            dists = [tuple((offset + t, p) for t, p in dist) for dist in g.transitions[s]]
            if g.owner[s] == CTRL:
                for j in range(1, k + 1):
                    acts.append(eps_action(j))
                    dists.append(((dummy_index[(s, j)], 1.0),))
            actions.append(tuple(acts))
            transitions.append(tuple(dists))
            metas.append({**g.state_meta(s), "product_state": s, "copy": i, "dummy": False})
            if s in c_i:
                c_star.add(offset + s)
            if s in b_i:
                b_star.add(offset + s)
    for j in range(1, k + 1):
        for s in ctrl:
            owner.append(ENV)
            labels.append(g.labels[s])
            actions.append((EPS_PRIME,))
            transitions.append(((((j - 1) * n + s, 1.0),),))
            metas.append({**g.state_meta(s), "product_state": s, "copy": k + j, "dummy": True})
            c_star.add(dummy_index[(s, j)])

    meta = _carried_meta(g)
    meta.update(kind="kcopy", k=k, base_states=n, base_kind=g.meta.get("kind"))
    meta["states"] = metas
    return StochasticGame(
        ap=g.ap,
        owner=tuple(owner),
        labels=tuple(labels),
        actions=tuple(actions),
        transitions=tuple(transitions),
        initial=g.initial,
        rabin_pairs=((frozenset(c_star), frozenset(b_star)),),
        meta=meta,
    )


def kcopy_state(kg: StochasticGame, s: int, copy: int) -> int:
    """Index of live state ``<s, copy>`` in a game built by :func:`build_kcopy`."""
    return (copy - 1) * kg.meta["base_states"] + s


def project_kcopy_state(kg: StochasticGame, x: int) -> tuple[int, int]:
    """(base state, copy tag in 1..2k) of k-copy state ``x``."""
    m = kg.meta["states"][x]
    return m["product_state"], m["copy"]


def kcopy_lift(kg: StochasticGame, base_states) -> frozenset[int]:
    """All k-copy states (live and dummy) whose base state is in ``base_states``."""
    base_states = set(base_states)
    return frozenset(x for x in range(kg.n_states) if kg.meta["states"][x]["product_state"] in base_states)


@dataclass(frozen=True)
class FiniteMemoryStrategy:
    """Controller strategy with memory modes 1..k.

    ``choice[(s, i)]`` is ``("action", a)`` (an action index of the base game)
    or ``("switch", j)``: in mode ``i`` at state ``s`` move to mode ``j`` and
    consult ``choice[(s, j)]``.
    """

    k: int
    choice: Mapping[tuple[int, int], tuple[str, int]]
    initial_mode: int = 1

    def resolve(self, s: int, mode: int) -> tuple[int, int]:
        """Follow mode switches at ``s``; return (final mode, action index)."""
        seen = [mode]
        while True:
            kind, value = self.choice[(s, mode)]
            if kind == "action":
                return mode, value
            mode = value
            if mode in seen:
                raise EpsilonCycleError(s, seen + [mode])
            seen.append(mode)

    def validate(self, states) -> None:
        for s in states:
            for i in range(1, self.k + 1):
                self.resolve(s, i)

    def uses_switches(self) -> bool:
        return any(kind == "switch" for kind, _ in self.choice.values())

    def memoryless(self, mode: int | None = None) -> Strategy:
        """The pure memoryless strategy played while staying in ``mode``."""
        mode = self.initial_mode if mode is None else mode
        states = sorted({s for s, _ in self.choice})
        return {s: self.resolve(s, mode)[1] for s in states}

    def to_json(self, g: StochasticGame) -> dict[str, Any]:
        modes = []
        for (s, i) in sorted(self.choice, key=lambda si: (si[1], si[0])):
            kind, value = self.choice[(s, i)]
            entry = {"state": s, "mode": i, "state_meta": g.state_meta(s)}
            entry["choice"] = {"action": g.actions[s][value]} if kind == "action" else {"switch": value}
            modes.append(entry)
        return {"k": self.k, "initial_mode": self.initial_mode, "modes": modes}


def strategy_from_json(doc: Mapping[str, Any], g: StochasticGame) -> FiniteMemoryStrategy:
    """Inverse of :meth:`FiniteMemoryStrategy.to_json` against the game ``g``."""
    try:
        k = int(doc["k"])
        choice = {}
        for entry in doc["modes"]:
            s, i = int(entry["state"]), int(entry["mode"])
            c = entry["choice"]
            if "action" in c:
                choice[(s, i)] = ("action", g.action_index(s, c["action"]))
            else:
                j = int(c["switch"])
                if not 1 <= j <= k:
                    raise InputError(f"switch target {j} outside 1..{k}")
                choice[(s, i)] = ("switch", j)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed strategy document: {exc}") from None
    fms = FiniteMemoryStrategy(k, choice, int(doc.get("initial_mode", 1)))
    expected = {(s, i) for s in g.controller_states for i in range(1, k + 1)}
    if set(choice) != expected:
        raise InputError("strategy does not cover every (controller state, mode) pair")
    return fms


def load_strategy(text: str, g: StochasticGame) -> FiniteMemoryStrategy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid strategy JSON: {exc}") from None
    return strategy_from_json(doc, g)


def induce_strategy(kg: StochasticGame, mu_star: Strategy) -> FiniteMemoryStrategy:
    """Translate a memoryless strategy of the k-copy game ``kg`` to k memory modes."""
    check_strategy(kg, mu_star, CTRL)
    k = kg.meta["k"]
    n = kg.meta["base_states"]
    choice = {}
    for x in kg.controller_states:
        s, i = project_kcopy_state(kg, x)
        name = kg.actions[x][mu_star[x]]
        if name.startswith("__eps_") and name != EPS_PRIME:
            choice[(s, i)] = ("switch", int(name[len("__eps_"):]))
        else:
            choice[(s, i)] = ("action", mu_star[x])
    fms = FiniteMemoryStrategy(k, choice)
    fms.validate(sorted({s for s, _ in choice}))
    assert all(s < n for s, _ in choice)
    return fms


def break_switch_cycles(kg: StochasticGame, mu_star: Strategy, slot_scores) -> tuple[Strategy, list[int]]:
    """Replace mode switches that cycle by the best-scoring base action.

    A k-copy strategy may bounce between a live state and its dummies forever
    (for example ``__eps_i`` taken in copy ``i``) when that is as good as any
    real move.  Such a choice has no finite-memory counterpart, so every
    controller state on a switch cycle plays its highest ``slot_scores``
    non-switch action instead (lowest index on ties).  ``slot_scores`` is
    indexed by the state-action slots of ``kg.arrays``.  Returns the repaired
    strategy and the sorted list of changed states.
    """
    mu = dict(mu_star)
    start = kg.arrays.sa_start
    by_mode = {project_kcopy_state(kg, x): x for x in kg.controller_states}

    def target(x):
        name = kg.actions[x][mu[x]]
        if name.startswith(EPS_PREFIX) and name != EPS_PRIME:
            return by_mode[(project_kcopy_state(kg, x)[0], int(name[len(EPS_PREFIX):]))]
        return None

    changed = set()
    for x in kg.controller_states:
        chain = [x]
        nxt = target(x)
        while nxt is not None and nxt not in chain:
            chain.append(nxt)
            nxt = target(nxt)
        if nxt is None:
            continue
        for y in chain[chain.index(nxt):]:
            base = [i for i, name in enumerate(kg.actions[y]) if not is_reserved_action(name)]
            mu[y] = max(base, key=lambda i: (slot_scores[start[y] + i], -i))
            changed.add(y)
    return mu, sorted(changed)
