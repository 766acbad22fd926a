"""LTL formulas: parsing, printing, desugaring and evaluation on lasso words.

Surface syntax (tightest binding first)::

    !  X  F  G         unary prefix operators
    &                  left-associative
    U                  right-associative
    |                  left-associative
    ->                 right-associative

plus the constants ``true``/``false`` and lowercase identifiers as atoms.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import LtlSyntaxError, UnknownAtomError


class Formula:
    """Base class of the LTL syntax tree."""

    __slots__ = ()

    @property
    def children(self) -> tuple["Formula", ...]:
        return ()

    def atoms(self) -> frozenset[str]:
        out: set[str] = set()
        for node in self.walk():
            if isinstance(node, Atom):
                out.add(node.name)
        return frozenset(out)

    def walk(self) -> Iterator["Formula"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, repr=False)
class TrueConst(Formula):
    def __repr__(self):
        return "TRUE"


TRUE = TrueConst()


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class _Unary(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


class Not(_Unary):
    pass


class Next(_Unary):
    pass


class Eventually(_Unary):
    pass


class Always(_Unary):
    pass


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Implies(_Binary):
    pass


class Until(_Binary):
    pass


FALSE = Not(TRUE)

_UNARY_SYMBOL = {Not: "!", Next: "X", Eventually: "F", Always: "G"}
_BINARY_SYMBOL = {And: "&", Or: "|", Implies: "->", Until: "U"}


def to_string(f: Formula) -> str:
    """Render ``f`` in the ASCII grammar; binary subterms are parenthesized."""
    if isinstance(f, TrueConst):
        return "true"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, _Unary):
        if f == FALSE:
            return "false"
        inner = to_string(f.arg)
        if isinstance(f.arg, _Binary):
            inner = f"({inner})"
        return f"{_UNARY_SYMBOL[type(f)]}{'' if isinstance(f, Not) else ' '}{inner}"
    if isinstance(f, _Binary):
        parts = []
        for child in (f.left, f.right):
            text = to_string(child)
            parts.append(f"({text})" if isinstance(child, _Binary) else text)
        return f"{parts[0]} {_BINARY_SYMBOL[type(f)]} {parts[1]}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<op>->|&&|\|\||[()!&|XFGU])|(?P<ident>[a-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            raise LtlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        tok = m.group("op") or m.group("ident")
        tokens.append(({"&&": "&", "||": "|"}.get(tok, tok), m.start(m.lastindex)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, ap: frozenset[str] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.ap = ap

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def position(self):
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of formula", len(self.text))
        if expected is not None and tok != expected:
            raise LtlSyntaxError(f"expected {expected!r}, found {tok!r}", self.position())
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek() is not None:
            raise LtlSyntaxError(f"unexpected token {self.peek()!r}", self.position())
        return f

    def implies(self):
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disjunction(self):
        f = self.until()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.until())
        return f

    def until(self):
        left = self.conjunction()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def conjunction(self):
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self):
        tok = self.peek()
        ops = {"!": Not, "X": Next, "F": Eventually, "G": Always}
        if tok in ops:
            self.take()
            return ops[tok](self.unary())
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        if tok is None or not (tok[0].islower() or tok[0] == "_"):
            raise LtlSyntaxError(
                "expected a formula" + (f", found {tok!r}" if tok else ""),
                self.position(),
            )
        self.take()
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if self.ap is not None and tok not in self.ap:
            raise UnknownAtomError(tok)
        return Atom(tok)


def parse_ltl(text: str, ap: Iterable[str] | None = None) -> Formula:
    """Parse ``text``; atoms must belong to ``ap`` when it is given."""
    if not text or not text.strip():
        raise LtlSyntaxError("empty formula", 0)
    return _Parser(text, None if ap is None else frozenset(ap)).parse()


def desugar(f: Formula) -> Formula:
    """Rewrite ``|``, ``->``, ``F`` and ``G`` into true/atoms/!/&/X/U."""
    if isinstance(f, (TrueConst, Atom)):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.arg))
    if isinstance(f, Next):
        return Next(desugar(f.arg))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Until):
        return Until(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Not(And(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Implies):
        return desugar(Or(Not(f.left), f.right))
    if isinstance(f, Eventually):
        return Until(TRUE, desugar(f.arg))
    if isinstance(f, Always):
        return Not(Until(TRUE, Not(desugar(f.arg))))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- lassos


@dataclass(frozen=True)
class LassoWord:
    """The infinite word ``prefix . cycle^omega`` over label sets."""

    prefix: tuple[frozenset[str], ...]
    cycle: tuple[frozenset[str], ...]
    ap: frozenset[str] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(frozenset(x) for x in self.prefix))
        object.__setattr__(self, "cycle", tuple(frozenset(x) for x in self.cycle))
        if not self.cycle:
            raise ValueError("lasso cycle must be nonempty")
        if self.ap is not None:
            object.__setattr__(self, "ap", frozenset(self.ap))
            for letter in self.prefix + self.cycle:
                extra = letter - self.ap
                if extra:
                    raise UnknownAtomError(sorted(extra)[0])

    def __len__(self):
        return len(self.prefix) + len(self.cycle)

    def letter(self, i: int) -> frozenset[str]:
        """Label at position ``i`` of the infinite word."""
        if i < len(self.prefix):
            return self.prefix[i]
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]

    def successor(self, i: int) -> int:
        """Next distinguishable position after position ``i`` (< len(self))."""
        return i + 1 if i + 1 < len(self) else len(self.prefix)


def valuation(f: Formula, w: LassoWord) -> list[bool]:
    """Truth value of ``f`` at each of the ``len(w)`` distinguishable positions."""
    n = len(w)
    succ = [w.successor(i) for i in range(n)]
    letters = [w.letter(i) for i in range(n)]
    cache: dict[Formula, list[bool]] = {}

    def val(g: Formula) -> list[bool]:
        hit = cache.get(g)
        if hit is not None:
            return hit
        if isinstance(g, TrueConst):
            out = [True] * n
        elif isinstance(g, Atom):
            out = [g.name in letters[i] for i in range(n)]
        elif isinstance(g, Not):
            out = [not x for x in val(g.arg)]
        elif isinstance(g, And):
            a, b = val(g.left), val(g.right)
            out = [x and y for x, y in zip(a, b)]
        elif isinstance(g, Or):
            a, b = val(g.left), val(g.right)
            out = [x or y for x, y in zip(a, b)]
        elif isinstance(g, Implies):
            a, b = val(g.left), val(g.right)
            out = [(not x) or y for x, y in zip(a, b)]
        elif isinstance(g, Next):
            a = val(g.arg)
            out = [a[succ[i]] for i in range(n)]
        elif isinstance(g, (Until, Eventually)):
            hold = val(g.left) if isinstance(g, Until) else [True] * n
            goal = val(g.right if isinstance(g, Until) else g.arg)
            out = _fixpoint(succ, lambda i, x: goal[i] or (hold[i] and x[succ[i]]), False)
        elif isinstance(g, Always):
            a = val(g.arg)
            out = _fixpoint(succ, lambda i, x: a[i] and x[succ[i]], True)
        else:
            raise TypeError(f"not a formula: {g!r}")
        cache[g] = out
        return out

    return val(f)


def _fixpoint(succ, step, init):
    # least (init False) or greatest (init True) fixed point over the lasso
    x = [init] * len(succ)
    changed = True
    while changed:
        changed = False
        for i in reversed(range(len(succ))):
            new = step(i, x)
            if new != x[i]:
                x[i] = new
                changed = True
    return x


def eval_lasso(f: Formula, w: LassoWord) -> bool:
    """Whether the infinite word ``w`` satisfies ``f``."""
    if w.ap is not None:
        extra = f.atoms() - w.ap
        if extra:
            raise UnknownAtomError(sorted(extra)[0])
    return valuation(f, w)[0]


def random_lasso(ap: Sequence[str], rng: random.Random, max_prefix: int = 4, max_cycle: int = 4) -> LassoWord:
    """Lasso with uniformly random letters over ``2^ap`` and random lengths."""
    ap = list(ap)

    def letter():
        return frozenset(a for a in ap if rng.random() < 0.5)

    prefix = tuple(letter() for _ in range(rng.randint(0, max_prefix)))
    cycle = tuple(letter() for _ in range(rng.randint(1, max_cycle)))
    return LassoWord(prefix, cycle, frozenset(ap))
