"""Scalar and vector fields on R^3 with symbolic differential operators.

All operators differentiate symbolically; finite differences never appear
here, so a nonzero residual downstream always points at a formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exprcalc import ZERO, CompiledExprs, Expr, add, as_expr, diff, mul, neg, parse, simplify, sub, variables

COORDS = ("x", "y", "z")


def _coerce(e) -> Expr:
    if isinstance(e, str):
        e = simplify(parse(e, COORDS))
    e = as_expr(e)
    extra = variables(e) - set(COORDS)
    if extra:
        raise ValueError(f"field expressions may only use x, y, z (found {sorted(extra)})")
    return e


@dataclass(frozen=True)
class ScalarField:
    expr: Expr

    def __post_init__(self):
        object.__setattr__(self, "expr", _coerce(self.expr))

    def __call__(self, points) -> np.ndarray:
        return CompiledExprs([self.expr])(points)[0]

    def at(self, x: float, y: float, z: float) -> float:
        return CompiledExprs([self.expr]).scalar(x, y, z)[0]

    def __str__(self):
        return str(self.expr)

    def __add__(self, other):
        return ScalarField(add(self.expr, _sexpr(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(sub(self.expr, _sexpr(other)))

    def __rsub__(self, other):
        return ScalarField(sub(_sexpr(other), self.expr))

    def __mul__(self, other):
        if isinstance(other, VectorField3):
            return scale(self, other)
        return ScalarField(mul(self.expr, _sexpr(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.expr / _sexpr(other))

    def __rtruediv__(self, other):
        return ScalarField(_sexpr(other) / self.expr)

    def __neg__(self):
        return ScalarField(neg(self.expr))


def _sexpr(obj) -> Expr:
    return obj.expr if isinstance(obj, ScalarField) else _coerce(obj)


@dataclass(frozen=True)
class VectorField3:
    components: tuple

    def __post_init__(self):
        comps = tuple(_coerce(c.expr if isinstance(c, ScalarField) else c) for c in self.components)
        if len(comps) != 3:
            raise ValueError("a vector field needs exactly three components")
        object.__setattr__(self, "components", comps)

    def __getitem__(self, i) -> Expr:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __call__(self, points) -> np.ndarray:
        """Values at ``(N, 3)`` points, shape ``(N, 3)``."""
        return CompiledExprs(self.components)(points).T

    def at(self, x: float, y: float, z: float) -> tuple:
        return CompiledExprs(self.components).scalar(x, y, z)

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"

    def __add__(self, other: "VectorField3"):
        return VectorField3(tuple(add(a, b) for a, b in zip(self, other)))

    def __sub__(self, other: "VectorField3"):
        return VectorField3(tuple(sub(a, b) for a, b in zip(self, other)))

    def __neg__(self):
        return VectorField3(tuple(neg(a) for a in self))


def scalar(src) -> ScalarField:
    return src if isinstance(src, ScalarField) else ScalarField(src)


def vector(srcs: Iterable) -> VectorField3:
    return srcs if isinstance(srcs, VectorField3) else VectorField3(tuple(srcs))


ZERO_VECTOR = VectorField3((ZERO, ZERO, ZERO))


def grad(f) -> VectorField3:
    e = scalar(f).expr
    return VectorField3(tuple(diff(e, c) for c in COORDS))


def curl(A) -> VectorField3:
    a = vector(A)
    return VectorField3((
        sub(diff(a[2], "y"), diff(a[1], "z")),
        sub(diff(a[0], "z"), diff(a[2], "x")),
        sub(diff(a[1], "x"), diff(a[0], "y")),
    ))


def div(A) -> ScalarField:
    a = vector(A)
    return ScalarField(add(add(diff(a[0], "x"), diff(a[1], "y")), diff(a[2], "z")))


def dot(A, B) -> ScalarField:
    a, b = vector(A), vector(B)
    return ScalarField(add(add(mul(a[0], b[0]), mul(a[1], b[1])), mul(a[2], b[2])))


def cross(A, B) -> VectorField3:
    a, b = vector(A), vector(B)
    return VectorField3((
        sub(mul(a[1], b[2]), mul(a[2], b[1])),
        sub(mul(a[2], b[0]), mul(a[0], b[2])),
        sub(mul(a[0], b[1]), mul(a[1], b[0])),
    ))


def scale(f, A) -> VectorField3:
    s = scalar(f).expr
    return VectorField3(tuple(mul(s, c) for c in vector(A)))


def helicity(A) -> ScalarField:
    """A·(∇×A); zero for every field of the form μ∇ψ."""
    return dot(A, curl(A))


def evaluate_fields(fields, points) -> list:
    """Evaluate several scalar/vector fields at once with shared subexpressions.

    Returns one array per field: ``(N,)`` for scalars, ``(N, 3)`` for vectors.
    """
    exprs, slices = [], []
    for f in fields:
        start = len(exprs)
        if isinstance(f, VectorField3):
            exprs.extend(f.components)
        else:
            exprs.append(_sexpr(f))
        slices.append((start, len(exprs), isinstance(f, VectorField3)))
    values = CompiledExprs(exprs)(points)
    return [values[a:b].T if is_vec else values[a] for a, b, is_vec in slices]
