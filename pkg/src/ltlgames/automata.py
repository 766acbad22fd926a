"""Deterministic Rabin automata read from HOA v1 text."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import (
    DeterminismError,
    HoaParseError,
    IncompletenessError,
    UnsupportedHoaError,
)
from .ltl import Formula, LassoWord, eval_lasso, random_lasso

RabinPair = tuple[frozenset[int], frozenset[int]]  # (C, B): finitely often / infinitely often


@dataclass(frozen=True)
class Dra:
    """A complete deterministic Rabin automaton over the alphabet 2^ap.

    ``delta[q][mask]`` is the successor of ``q`` on the letter whose bit ``i``
    is set iff ``ap[i]`` holds.
    """

    ap: tuple[str, ...]
    delta: tuple[tuple[int, ...], ...]
    initial: int
    pairs: tuple[RabinPair, ...]

    def __post_init__(self):
        n = len(self.delta)
        if not self.pairs:
            raise UnsupportedHoaError("a Rabin automaton needs at least one pair")
        if not 0 <= self.initial < n:
            raise HoaParseError(f"initial state {self.initial} out of range")
        for row in self.delta:
            if len(row) != 1 << len(self.ap) or any(not 0 <= t < n for t in row):
                raise HoaParseError("malformed transition table")
        for c, b in self.pairs:
            if any(not 0 <= q < n for q in c | b):
                raise HoaParseError("acceptance set mentions an unknown state")

    @property
    def n_states(self) -> int:
        return len(self.delta)

    @property
    def k(self) -> int:
        return len(self.pairs)

    def mask(self, label: Iterable[str]) -> int:
        """Letter index of ``label``; atoms outside ``ap`` are ignored."""
        label = set(label)
        return sum(1 << i for i, a in enumerate(self.ap) if a in label)

    def step(self, q: int, label: Iterable[str]) -> int:
        return self.delta[q][self.mask(label)]

    def accepts_inf_set(self, inf_set: Iterable[int]) -> bool:
        inf_set = set(inf_set)
        return any(not (inf_set & c) and (inf_set & b) for c, b in self.pairs)


def dra_run_lasso(a: Dra, w: LassoWord) -> tuple[frozenset[int], bool]:
    """Run ``a`` on ``w``; return the states visited infinitely often and acceptance."""
    q = a.initial
    for letter in w.prefix:
        q = a.step(q, letter)
    cycle = [a.mask(letter) for letter in w.cycle]
    seen: dict[tuple[int, int], int] = {}
    trace: list[int] = []
    pos = 0
    while (q, pos) not in seen:
        seen[(q, pos)] = len(trace)
        trace.append(q)
        q = a.delta[q][cycle[pos]]
        pos = (pos + 1) % len(cycle)
    inf_set = frozenset(trace[seen[(q, pos)]:])
    return inf_set, a.accepts_inf_set(inf_set)


# ------------------------------------------------------------------ HOA

_HOA_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>/\*.*?\*/)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<body>--BODY--|--END--|--ABORT--)
  | (?P<header>[A-Za-z_][A-Za-z0-9_-]*:)
  | (?P<int>\d+)
  | (?P<alias>@[A-Za-z0-9_-]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_-]*)
  | (?P<punct>[!&|()\[\]{}])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _hoa_tokens(text: str) -> list[_Tok]:
    out = []
    pos, line = 0, 1
    while pos < len(text):
        m = _HOA_TOKEN.match(text, pos)
        if m is None:
            raise HoaParseError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind not in ("ws", "nl", "comment"):
            out.append(_Tok(kind, m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    return out


class _Stream:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def line(self):
        tok = self.peek()
        return tok.line if tok else (self.toks[-1].line if self.toks else 1)

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise HoaParseError("unexpected end of input", self.line())
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise HoaParseError(f"expected {text!r}, found {tok.text!r}", tok.line)
        return tok

    def integer(self) -> int:
        tok = self.next()
        if tok.kind != "int":
            raise HoaParseError(f"expected an integer, found {tok.text!r}", tok.line)
        return int(tok.text)

    def at(self, *texts: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text in texts


def _parse_bool(s: _Stream, atom: Callable[[_Stream], object]):
    """Boolean expression over ``atom`` as nested tuples ('or'|'and'|'not', ...)."""

    def disj():
        terms = [conj()]
        while s.at("|"):
            s.next()
            terms.append(conj())
        return terms[0] if len(terms) == 1 else ("or", *terms)

    def conj():
        terms = [unary()]
        while s.at("&"):
            s.next()
            terms.append(unary())
        return terms[0] if len(terms) == 1 else ("and", *terms)

    def unary():
        if s.at("!"):
            s.next()
            return ("not", unary())
        if s.at("("):
            s.next()
            e = disj()
            s.expect(")")
            return e
        return atom(s)

    return disj()


def _guard_atom(s: _Stream):
    tok = s.next()
    if tok.kind == "int":
        return ("ap", int(tok.text))
    if tok.kind == "alias":
        return ("alias", tok.text, tok.line)
    if tok.text in ("t", "f"):
        return ("const", tok.text == "t")
    raise HoaParseError(f"bad label expression near {tok.text!r}", tok.line)


def _acc_atom(s: _Stream):
    tok = s.next()
    if tok.text in ("t", "f"):
        return ("const", tok.text == "t")
    if tok.text not in ("Fin", "Inf"):
        raise HoaParseError(f"bad acceptance condition near {tok.text!r}", tok.line)
    s.expect("(")
    if s.at("!"):
        raise UnsupportedHoaError("complemented acceptance sets are not supported")
    idx = s.integer()
    s.expect(")")
    return (tok.text, idx)


def _eval_guard(e, mask: int, aliases: dict) -> bool:
    tag = e[0]
    if tag == "ap":
        return bool(mask >> e[1] & 1)
    if tag == "const":
        return e[1]
    if tag == "not":
        return not _eval_guard(e[1], mask, aliases)
    if tag == "and":
        return all(_eval_guard(x, mask, aliases) for x in e[1:])
    if tag == "or":
        return any(_eval_guard(x, mask, aliases) for x in e[1:])
    if tag == "alias":
        if e[1] not in aliases:
            raise HoaParseError(f"undefined alias {e[1]}", e[2])
        return _eval_guard(aliases[e[1]], mask, aliases)
    raise AssertionError(tag)


def _rabin_pairs(expr, n_sets: int) -> list[tuple[int | None, int | None]]:
    """Split an acceptance condition into (Fin set, Inf set) index pairs.

    ``None`` for the Fin component means "no constraint"; for the Inf component
    it means "every state".
    """
    disjuncts = list(expr[1:]) if expr[0] == "or" else [expr]
    pairs = []
    for d in disjuncts:
        atoms = list(d[1:]) if d[0] == "and" else [d]
        fins = [a[1] for a in atoms if a[0] == "Fin"]
        infs = [a[1] for a in atoms if a[0] == "Inf"]
        consts = [a for a in atoms if a[0] == "const"]
        if any(a[0] in ("or", "and", "not") for a in atoms):
            raise UnsupportedHoaError("acceptance condition is not in Rabin form")
        if len(fins) > 1 or len(infs) > 1:
            raise UnsupportedHoaError("acceptance condition is not in Rabin form")
        if any(not c[1] for c in consts):
            continue  # a disjunct containing 'f' never holds
        for idx in fins + infs:
            if idx >= n_sets:
                raise HoaParseError(f"acceptance set {idx} not declared")
        pairs.append((fins[0] if fins else None, infs[0] if infs else None))
    return pairs


def parse_hoa(text: str) -> Dra:
    """Parse a deterministic, complete, state-based Rabin automaton in HOA v1."""
    s = _Stream(_hoa_tokens(text))
    tok = s.next()
    if tok.text != "HOA:":
        raise HoaParseError("input does not start with 'HOA:'", tok.line)
    version = s.next()
    if not version.text.startswith("v1"):
        raise UnsupportedHoaError(f"unsupported HOA version {version.text}")

    n_states = None
    starts: list[int] = []
    ap: list[str] | None = None
    aliases: dict[str, object] = {}
    acc_expr = None
    n_sets = 0
    while not s.at("--BODY--"):
        head = s.next()
        if head.kind != "header":
            raise HoaParseError(f"expected a header item, found {head.text!r}", head.line)
        name = head.text[:-1]
        if name == "States":
            n_states = s.integer()
        elif name == "Start":
            starts.append(s.integer())
            if s.at("&"):
                raise UnsupportedHoaError("alternating initial states are not supported")
        elif name == "AP":
            count = s.integer()
            ap = []
            for _ in range(count):
                t = s.next()
                if t.kind != "string":
                    raise HoaParseError("AP names must be quoted strings", t.line)
                ap.append(t.text[1:-1])
        elif name == "Alias":
            alias = s.next()
            if alias.kind != "alias":
                raise HoaParseError("expected an alias name", alias.line)
            aliases[alias.text] = _parse_bool(s, _guard_atom)
        elif name == "Acceptance":
            n_sets = s.integer()
            acc_expr = _parse_bool(s, _acc_atom)
        else:
            # acc-name, properties, name, tool, ... are advisory
            while s.peek() is not None and s.peek().kind not in ("header", "body"):
                s.next()
    s.expect("--BODY--")

    if ap is None:
        ap = []
    if acc_expr is None:
        raise HoaParseError("missing Acceptance: header")
    if len(starts) != 1:
        raise DeterminismError(f"expected exactly one initial state, found {len(starts)}")

    edges: dict[int, list[tuple[object, int, int]]] = {}
    membership: dict[int, set[int]] = {}
    while not s.at("--END--"):
        head = s.next()
        if head.text != "State:":
            raise HoaParseError(f"expected 'State:', found {head.text!r}", head.line)
        if s.at("["):
            raise UnsupportedHoaError("state labels are not supported")
        q = s.integer()
        if q in edges:
            raise HoaParseError(f"state {q} defined twice", head.line)
        if s.peek() is not None and s.peek().kind == "string":
            s.next()
        acc = set()
        if s.at("{"):
            s.next()
            while not s.at("}"):
                acc.add(s.integer())
            s.next()
        membership[q] = acc
        edges[q] = []
        while s.peek() is not None and s.peek().text not in ("State:", "--END--"):
            line = s.line()
            if not s.at("["):
                raise UnsupportedHoaError(
                    f"line {line}: implicit edge labels are not supported"
                )
            s.next()
            guard = _parse_bool(s, _guard_atom)
            s.expect("]")
            dst = s.integer()
            if s.at("&"):
                raise UnsupportedHoaError(f"line {line}: alternating edges are not supported")
            if s.at("{"):
                raise UnsupportedHoaError(
                    f"line {line}: transition-based acceptance is not supported"
                )
            edges[q].append((guard, dst, line))
    s.expect("--END--")

    if n_states is None:
        n_states = max(
            [max(edges, default=-1)]
            + [d for es in edges.values() for _, d, _ in es]
            + starts
        ) + 1
    for q in edges:
        if q >= n_states:
            raise HoaParseError(f"state {q} exceeds declared state count {n_states}")

    delta = []
    for q in range(n_states):
        row = []
        for mask in range(1 << len(ap)):
            hits = [(d, line) for g, d, line in edges.get(q, []) if _eval_guard(g, mask, aliases)]
            label = frozenset(a for i, a in enumerate(ap) if mask >> i & 1)
            if not hits:
                raise IncompletenessError(q, label)
            if len(hits) > 1:
                raise DeterminismError(
                    f"state {q} has {len(hits)} edges enabled on label {sorted(label)} "
                    f"(lines {', '.join(str(line) for _, line in hits)})"
                )
            dst = hits[0][0]
            if dst >= n_states:
                raise HoaParseError(f"edge target {dst} exceeds state count", hits[0][1])
            row.append(dst)
        delta.append(tuple(row))

    every = frozenset(range(n_states))

    def members(idx):
        return frozenset(q for q, sets in membership.items() if idx in sets)

    pairs = []
    for fin, inf in _rabin_pairs(acc_expr, n_sets):
        c = members(fin) if fin is not None else frozenset()
        b = members(inf) if inf is not None else every
        pairs.append((c, b))
    return Dra(tuple(ap), tuple(delta), starts[0], tuple(pairs))


def load_hoa(path) -> Dra:
    with open(path, encoding="utf-8") as fh:
        return parse_hoa(fh.read())


def disagreements(a: Dra, f: Formula, samples: int, seed: int = 0, ap: Sequence[str] | None = None) -> list[LassoWord]:
    """Random lassos on which ``a`` and the formula ``f`` disagree."""
    rng = random.Random(seed)
    ap = tuple(ap) if ap is not None else tuple(sorted(set(a.ap) | f.atoms()))
    out = []
    for _ in range(samples):
        w = random_lasso(ap, rng, max_prefix=6, max_cycle=6)
        if dra_run_lasso(a, w)[1] != eval_lasso(f, w):
            out.append(w)
    return out
