"""Frequencies on the torus: continued fractions, convergents, circle norm."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Remainders below this are treated as exact: the float input cannot
# distinguish the frequency from the rational truncation at that point.
_RATIONAL_EPS = 1e-13


def circle_norm(x):
    """Distance to the nearest integer, ||x||_T.  Accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    out = np.abs(x - np.round(x))
    return float(out) if out.ndim == 0 else out


def continued_fraction(omega: float, depth: int = 40):
    """Partial quotients [a1, a2, ...] of omega in (0,1).

    Stops early when the remainder is zero to working precision; the second
    return value reports whether that happened (i.e. omega is rational as a
    float).
    """
    if not 0.0 < omega < 1.0:
        raise ValueError(f"omega must lie in (0,1), got {omega}")
    quotients = []
    x = omega
    rational = False
    for _ in range(depth):
        x = 1.0 / x
        a = math.floor(x)
        quotients.append(a)
        x -= a
        if x < _RATIONAL_EPS:
            rational = True
            break
    return quotients, rational


def convergents(partial_quotients):
    """Convergents p_k/q_k from partial quotients; denominators increase."""
    out = []
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    for a in partial_quotients:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append((p, q))
    return out


@dataclass(frozen=True)
class Frequency:
    """An irrational rotation number with its continued-fraction expansion."""

    omega: float
    partial_quotients: list = field(default_factory=list)
    rational: bool = False

    @classmethod
    def from_float(cls, omega: float, depth: int = 40) -> "Frequency":
        quotients, rational = continued_fraction(omega, depth)
        return cls(omega=omega, partial_quotients=quotients, rational=rational)

    def convergents(self):
        return convergents(self.partial_quotients)

    def __post_init__(self):
        qs = [q for _, q in convergents(self.partial_quotients)]
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError("convergent denominators must be strictly increasing")


def golden() -> Frequency:
    """The inverse golden ratio (sqrt(5)-1)/2; all partial quotients are 1."""
    return Frequency.from_float((math.sqrt(5.0) - 1.0) / 2.0)
