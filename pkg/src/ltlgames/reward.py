"""Rabin-pair rewards and state-dependent discounts.

With a single base parameter ``c`` in (0, 1) the discounts are

    gamma_C = 1 - c      on C states (no reward)
    gamma_B = 1 - c**2   on B states (reward 1 - gamma_B)
    gamma   = 1 - c**3   elsewhere (no reward)

so that (1 - gamma) / (1 - gamma_B) = (1 - gamma_B) / (1 - gamma_C) = c.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

OVERLAP_POLICIES = ("c-wins", "b-wins", "error")


@dataclass(frozen=True)
class RewardScheme:
    c: float
    B: frozenset[int]
    C: frozenset[int]
    overlap: str = "c-wins"

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")
        if self.overlap not in OVERLAP_POLICIES:
            raise ValueError(f"overlap must be one of {OVERLAP_POLICIES}")
        object.__setattr__(self, "B", frozenset(self.B))
        object.__setattr__(self, "C", frozenset(self.C))
        if self.overlap == "error" and self.B & self.C:
            raise ValueError(f"states in both B and C: {sorted(self.B & self.C)[:5]}")

    @classmethod
    def for_pair(cls, pair, c: float = 0.01, overlap: str = "c-wins") -> "RewardScheme":
        C, B = pair
        return cls(c, frozenset(B), frozenset(C), overlap)

    @property
    def gamma(self) -> float:
        return 1.0 - self.c**3

    @property
    def gamma_b(self) -> float:
        return 1.0 - self.c**2

    @property
    def gamma_c(self) -> float:
        return 1.0 - self.c

    def _in_b(self, s: int) -> bool:
        if s not in self.B:
            return False
        return self.overlap == "b-wins" or s not in self.C

    def reward(self, s: int) -> float:
        return 1.0 - self.gamma_b if self._in_b(s) else 0.0

    def discount(self, s: int) -> float:
        if self._in_b(s):
            return self.gamma_b
        if s in self.C:
            return self.gamma_c
        return self.gamma

    def vectors(self, n_states: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-state reward and discount arrays."""
        R = np.array([self.reward(s) for s in range(n_states)])
        G = np.array([self.discount(s) for s in range(n_states)])
        return R, G

    def describe(self) -> dict:
        return {
            "c": self.c,
            "gamma": self.gamma,
            "gamma_B": self.gamma_b,
            "gamma_C": self.gamma_c,
            "overlap": self.overlap,
        }


def path_return(scheme: RewardScheme, states: Sequence[int]) -> float:
    """Discounted return of a finite path, accumulated from its last state back."""
    if len(states) == 0:
        raise ValueError("path must be nonempty")
    g = 0.0
    for s in reversed(states):
        g = scheme.reward(s) + scheme.discount(s) * g
    return g


def path_returns(scheme: RewardScheme, states: Sequence[int]) -> list[float]:
    """Returns of every suffix: ``out[t]`` is the return of ``states[t:]``; ``out[-1] == 0``."""
    out = [0.0] * (len(states) + 1)
    for t in range(len(states) - 1, -1, -1):
        s = states[t]
        out[t] = scheme.reward(s) + scheme.discount(s) * out[t + 1]
    return out

