"""Deterministic sample points and random test functions.

Point sets come from a counter-based SplitMix64 stream so that any
implementation can reproduce them exactly: coordinate ``c`` of point ``i``
in a ``d``-dimensional box uses counter ``k = d*i + c`` and

    z = seed + (k + 1) * 0x9E3779B97F4A7C15            (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9           (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB           (mod 2**64)
    z =  z ^ (z >> 31)
    u = (z >> 11) * 2**-53                              in [0, 1)

and the coordinate is ``lo[c] + u * (hi[c] - lo[c])``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .exprcalc import ONE, ZERO, Const, Var, add, mul, power
from .vfield import ScalarField

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, counters) -> np.ndarray:
    """SplitMix64 outputs for an array of counters (uint64)."""
    k = np.asarray(counters, dtype=np.uint64)
    z = np.uint64(seed % 2**64) + (k + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform01(seed: int, counters) -> np.ndarray:
    return (splitmix64(seed, counters) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def uniform_box(lo, hi, n: int, seed: int) -> np.ndarray:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    d = lo.size
    u = uniform01(seed, np.arange(n * d, dtype=np.uint64)).reshape(n, d)
    return lo + u * (hi - lo)


@dataclass(frozen=True)
class SampleDomain:
    """Axis-aligned box with a seeded uniform sampler."""

    lo: tuple
    hi: tuple
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        lo, hi = tuple(float(v) for v in self.lo), tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("domain bounds must have three components")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"domain min {lo} must be below max {hi} componentwise")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def points(self, n: int | None = None, seed: int | None = None) -> np.ndarray:
        return uniform_box(self.lo, self.hi, self.samples if n is None else n,
                           self.seed if seed is None else seed)

    def vertices(self) -> np.ndarray:
        """The eight corners followed by the centre."""
        corners = [list(c) for c in itertools.product(*zip(self.lo, self.hi))]
        centre = [(a + b) / 2 for a, b in zip(self.lo, self.hi)]
        return np.array(corners + [centre])


def _monomials(degree: int):
    return [m for m in itertools.product(range(degree + 1), repeat=3) if sum(m) <= degree]


def random_polynomial(rng: np.random.Generator, degree: int = 3, terms: int = 4) -> ScalarField:
    """Sparse polynomial in x, y, z with total degree <= ``degree``.

    Coefficients are uniform in [-1, 1]; the leading monomial of the draw has
    full degree so the function is never constant for degree >= 1.
    """
    monos = _monomials(degree)
    top = [m for m in monos if sum(m) == degree]
    chosen = [top[rng.integers(len(top))]]
    rest = [m for m in monos if m != chosen[0]]
    for i in rng.choice(len(rest), size=min(terms - 1, len(rest)), replace=False):
        chosen.append(rest[i])
    expr = ZERO
    for mono in chosen:
        term = Const(float(rng.uniform(-1.0, 1.0)))
        for name, k in zip("xyz", mono):
            if k:
                term = mul(term, power(Var(name), Const(k)) if k > 1 else Var(name))
        expr = add(expr, term)
    return ScalarField(expr if expr is not ZERO else ONE)
