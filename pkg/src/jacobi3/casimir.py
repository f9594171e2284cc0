"""Casimir functions of rank-2 structures by the method of characteristics.

For A = μ∇ψ with ψ = ψ̂(ξ₁, ξ₂) a Casimir has the form C = μ e^Γ where
Γ(u, v) solves

    Γ_u ψ̂_v − Γ_v ψ̂_u = −1

in the leaf coordinates (u, v) = (ξ₁, ξ₂). Along the characteristics

    du/ds = ψ̂_v,   dv/ds = −ψ̂_u,   dΓ/ds = −1

ψ̂ is constant, so Γ is fixed by its value Γ̄(ψ) on a transversal curve
plus the signed flow time needed to reach that curve.

Branch choice: from a point p both directions are tried and the one that
reaches the transversal with the shorter arc wins (ties go forward). For
the circle flow around the origin this gives the usual atan2 branch, with
the cut on the far side of the transversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StationaryPsi, TransversalMiss, WrongKind
from .exprcalc import CompiledExprs, Expr, as_expr, diff, parse, variables
from .ode import Controls, Event, Solution, solve
from .structures import JacobiStructure, Rank2, Rank3, Summary
from .vfield import evaluate_fields, grad, scalar

STATIONARY_FLOOR = 1e-10


@dataclass(frozen=True)
class Transversal:
    """The curve ``curve(u, v) = 0`` in the leaf plane, restricted to
    ``side(u, v) > 0`` when a side is given."""

    curve: Expr
    side: Expr | None = None

    def __post_init__(self):
        object.__setattr__(self, "curve", _uv_expr(self.curve))
        if self.side is not None:
            object.__setattr__(self, "side", _uv_expr(self.side))

    def __str__(self):
        text = f"{self.curve} = 0"
        return text if self.side is None else f"{text}, {self.side} > 0"


def _uv_expr(e) -> Expr:
    e = parse(e, ("u", "v")) if isinstance(e, str) else as_expr(e)
    extra = variables(e) - {"u", "v"}
    if extra:
        raise ValueError(f"transversal expressions may only use u, v (found {sorted(extra)})")
    return e


def _gamma_bar_expr(e) -> Expr:
    e = parse(e) if isinstance(e, str) else as_expr(e)
    if len(variables(e)) > 1:
        raise ValueError(f"gamma_bar must depend on a single variable, got {sorted(variables(e))}")
    return e


@dataclass(frozen=True)
class Characteristic:
    s_hit: float          # signed flow time from the point to the transversal
    arc: float            # arc length travelled in the (u, v) plane
    path: Solution        # states (u, v, s) against arc length
    hit: tuple            # (u, v) on the transversal


class CasimirField:
    """Numeric Casimir C = μ e^Γ of a rank-2 structure."""

    def __init__(self, J: JacobiStructure, gamma_bar, transversal: Transversal,
                 arc_budget: float = 50.0, controls: Controls | None = None):
        if isinstance(J.kind, Rank3):
            raise WrongKind("rank-3 structures have no nontrivial Casimirs")
        if not isinstance(J.kind, Rank2):
            raise WrongKind(f"Casimirs by characteristics need a rank-2 structure, got {J.kind_name}")
        self.structure = J
        self.gamma_bar = _gamma_bar_expr(gamma_bar)
        self.transversal = transversal
        self.arc_budget = float(arc_budget)
        self.controls = controls or Controls()
        k = J.kind
        ph = k.psi_hat
        self._leaf = CompiledExprs([ph, diff(ph, "u"), diff(ph, "v")], ("u", "v"))
        trans = [transversal.curve] + ([transversal.side] if transversal.side is not None else [])
        self._trans = CompiledExprs(trans, ("u", "v"))
        gvars = sorted(variables(self.gamma_bar))
        self._gbar_var = gvars[0] if gvars else "u"
        self._gbar = CompiledExprs([self.gamma_bar], (self._gbar_var,))
        self._point = CompiledExprs([k.mu.expr, k.xi1.expr, k.xi2.expr])

    def __repr__(self):
        return f"CasimirField(gamma_bar={self.gamma_bar}, transversal={self.transversal})"

    # leaf-plane pieces -------------------------------------------------

    def _rhs(self, _arc, y):
        _, pu, pv = self._leaf.scalar(y[0], y[1])
        n = math.hypot(pu, pv)
        if n < STATIONARY_FLOOR:
            raise StationaryPsi(f"grad psi_hat vanishes near (u, v) = ({y[0]:.6g}, {y[1]:.6g})", (y[0], y[1]))
        return np.array([pv / n, -pu / n, 1.0 / n])

    def _event(self) -> Event:
        curve = lambda _t, y: self._trans.scalar(y[0], y[1])[0]
        if self.transversal.side is None:
            return Event(curve)
        return Event(curve, lambda _t, y: self._trans.scalar(y[0], y[1])[1] > 0)

    def _on_transversal(self, u, v) -> bool:
        vals = self._trans.scalar(u, v)
        return abs(vals[0]) <= 1e-14 and (len(vals) == 1 or vals[1] > 0)

    def characteristic(self, u: float, v: float) -> Characteristic:
        """Follow the characteristic through (u, v) to the transversal."""
        y0 = np.array([u, v, 0.0])
        if self._on_transversal(u, v):
            self._rhs(0.0, y0)  # still reject stationary points
            sol = Solution(np.array([0.0]), y0[None, :], np.zeros((1, 3)), 0.0, y0)
            return Characteristic(0.0, 0.0, sol, (u, v))
        event = self._event()
        best = None
        budget = self.arc_budget
        for sign in (1.0, -1.0):
            sol = solve(self._rhs, 0.0, y0, sign * budget, self.controls, [event])
            # backward must be strictly shorter, so points on the cut go forward
            if sol.event_t is not None and (best is None or abs(sol.event_t) < best.arc * (1 - 1e-10)):
                ye = sol.event_y
                best = Characteristic(float(ye[2]), abs(sol.event_t), sol, (float(ye[0]), float(ye[1])))
                budget = abs(sol.event_t)
        if best is None:
            raise TransversalMiss(
                f"characteristic through (u, v) = ({u:.6g}, {v:.6g}) misses the transversal "
                f"{self.transversal} within arc length {self.arc_budget:g}", (u, v))
        return best

    def gamma_uv(self, u: float, v: float) -> float:
        psi = self._leaf.scalar(u, v)[0]
        return self.characteristic(u, v).s_hit + self._gbar.scalar(psi)[0]

    # points in R^3 -----------------------------------------------------

    def gamma(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        _, xi1, xi2 = self._point(pts)
        return np.array([self.gamma_uv(u, v) for u, v in zip(xi1, xi2)])

    def evaluator(self, p) -> float:
        mu, u, v = self._point.scalar(*p)
        return mu * math.exp(self.gamma_uv(u, v))

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mu, xi1, xi2 = self._point(pts)
        return np.array([m * math.exp(self.gamma_uv(u, v)) for m, u, v in zip(mu, xi1, xi2)])


def casimir(J: JacobiStructure, gamma_bar, transversal: Transversal, arc_budget: float = 50.0,
            controls: Controls | None = None) -> CasimirField:
    return CasimirField(J, gamma_bar, transversal, arc_budget, controls)


def fd_gradient(func, points, step: float = 1e-5) -> np.ndarray:
    """Central differences of a pointwise function on (N, 3) points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty_like(pts)
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = step
        out[:, k] = (func(pts + dp) - func(pts - dp)) / (2 * step)
    return out


@dataclass(frozen=True)
class CasimirResidual:
    cross: Summary     # |∇C×A − C E| / C
    reeb: Summary      # |E·∇C| / C

    @property
    def max_abs(self) -> float:
        return max(self.cross.max_abs, self.reeb.max_abs)


def casimir_residual(J: JacobiStructure, C: CasimirField, points, step: float = 1e-5) -> CasimirResidual:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = C(pts)
    gc = fd_gradient(C, pts, step)
    Av, Ev = evaluate_fields([J.A, J.E], pts)
    cross = np.cross(gc, Av) - c[:, None] * Ev
    return CasimirResidual(
        Summary.of(np.linalg.norm(cross, axis=1) / np.abs(c)),
        Summary.of(np.einsum("ij,ij->i", Ev, gc) / np.abs(c)),
    )


def bracket_residual(J: JacobiStructure, C: CasimirField, f, points, step: float = 1e-5):
    """|{f, C}| / C with ∇C from central differences.

    ``f`` may be a list of functions; ∇C is then computed once and one
    Summary per function is returned.
    """
    many = isinstance(f, (list, tuple))
    fs = [scalar(g) for g in (f if many else [f])]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = C(pts)
    gc = fd_gradient(C, pts, step)
    Av, Ev = evaluate_fields([J.A, J.E], pts)
    dot = lambda a, b: np.einsum("ij,ij->i", a, b)
    out = []
    for g in fs:
        fv, gf = evaluate_fields([g, grad(g)], pts)
        value = dot(Av, np.cross(gf, gc)) + fv * dot(Ev, gc) - c * dot(Ev, gf)
        out.append(Summary.of(value / np.abs(c)))
    return out if many else out[0]


def leaf_residual(C: CasimirField, uv_points, step: float = 1e-5) -> Summary:
    """|Γ_u ψ̂_v − Γ_v ψ̂_u + 1| by central differences in the leaf plane."""
    out = []
    for u, v in np.atleast_2d(uv_points):
        gu = (C.gamma_uv(u + step, v) - C.gamma_uv(u - step, v)) / (2 * step)
        gv = (C.gamma_uv(u, v + step) - C.gamma_uv(u, v - step)) / (2 * step)
        _, pu, pv = C._leaf.scalar(u, v)
        out.append(gu * pv - gv * pu + 1.0)
    return Summary.of(out)
