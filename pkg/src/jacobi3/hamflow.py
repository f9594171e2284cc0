"""Hamiltonian vector fields, their flows, and the diagnostics that go with them.

Two sign conventions are available for v_H:

``"sharp"`` (default)
    v_H = Λ♯(dH) + H E = A×∇H + H E. This is the one for which
    H ↦ v_H is a Lie algebra homomorphism, v_{f,g} = [v_f, v_g], and
    v_H is exactly the E of the conformal change of (A, E) by H.
``"grad_cross"``
    v_H = ∇H×A + H E. Same field for H = 1. With this choice a rank-2
    (μ, H) flow is the H = 1 flow of (μH) and the rank-3 divergence is
    ∇φ·∇×(HA) for every H.

Whatever the convention, v_H(H) = H E(H), so dH/dt = H E(H).
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import WrongKind
from .exprcalc import X, Y, Z, CompiledExprs, Const, add, func, mul
from .ode import Controls, solve
from .structures import JacobiStructure, Poisson, Rank2, Rank3, Summary, bracket
from .vfield import (
    ScalarField,
    VectorField3,
    cross,
    curl,
    div,
    dot,
    evaluate_fields,
    grad,
    scalar,
    scale,
    vector,
)

CONVENTIONS = ("sharp", "grad_cross")
CSV_COLUMNS = ("t", "x", "y", "z", "psi", "casimir", "H", "div_vH")


def hamiltonian_field(J: JacobiStructure, H, convention: str = "sharp") -> VectorField3:
    H = scalar(H)
    gH = grad(H)
    if convention == "sharp":
        lam = cross(J.A, gH)
    elif convention == "grad_cross":
        lam = cross(gH, J.A)
    else:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    return lam + scale(H, J.E)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    monitors: dict = field(default_factory=dict)   # name -> array, or None when not applicable
    steps: int = 0
    rejected: int = 0

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory has non-finite states")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def rows(self):
        cols = [self.monitors.get(name) for name in CSV_COLUMNS[4:]]
        for i, (t, p) in enumerate(zip(self.times, self.states)):
            extra = ["" if c is None else _num(c[i]) for c in cols]
            yield [_num(t), _num(p[0]), _num(p[1]), _num(p[2])] + extra

    def to_csv(self, target=None) -> str:
        """Write CSV (to a path or file object) and return the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(self.rows())
        text = buf.getvalue()
        if isinstance(target, str):
            with open(target, "w", newline="") as fh:
                fh.write(text)
        elif target is not None:
            target.write(text)
        return text


def _num(v) -> str:
    return "%.17g" % float(v)


def _psi_field(J: JacobiStructure):
    if isinstance(J.kind, (Rank2, Poisson)):
        return J.kind.psi
    return None


def integrate(J: JacobiStructure, H, x0, t_end: float, controls: Controls | None = None,
              n_out: int | None = 200, casimir=None, convention: str = "sharp") -> Trajectory:
    """Flow of v_H from x0 over [0, t_end].

    With ``n_out`` the trajectory is reported on a uniform grid of
    n_out + 1 times; the integrator lands on each grid time, so reported
    states are genuine RK states rather than interpolated ones. With None
    the accepted steps are returned. Monitors are evaluated from the
    symbolic fields at the returned states.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    H = scalar(H)
    v = hamiltonian_field(J, H, convention)
    rhs_c = CompiledExprs(v.components)
    rhs = lambda _t, y: rhs_c.scalar(y[0], y[1], y[2])
    grid = None if n_out is None else np.linspace(0.0, float(t_end), int(n_out) + 1)
    sol = solve(rhs, 0.0, np.asarray(x0, dtype=float), float(t_end), controls, stops=grid)
    if grid is None:
        times, states = sol.t, sol.y
    else:
        idx = np.searchsorted(sol.t, grid)
        times, states = grid, sol.y[idx]
    mons = monitors(J, H, states, casimir=casimir, convention=convention)
    return Trajectory(times, states, mons, sol.steps, sol.rejected)


def monitors(J: JacobiStructure, H, states, casimir=None, convention: str = "sharp") -> dict:
    H = scalar(H)
    psi = _psi_field(J)
    fields = [H, div(hamiltonian_field(J, H, convention))] + ([psi] if psi is not None else [])
    vals = evaluate_fields(fields, states)
    return {
        "psi": vals[2] if psi is not None else None,
        "casimir": None if casimir is None else casimir(states),
        "H": vals[0],
        "div_vH": vals[1],
    }


def ensemble(J: JacobiStructure, H, starts, t_end: float, workers: int = 4, **kwargs) -> list:
    """Independent trajectories; results come back in the order of ``starts``."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda x0: integrate(J, H, x0, t_end, **kwargs), starts))


def conservation_report(traj: Trajectory, J: JacobiStructure | None = None, quantities=None) -> dict:
    """Max relative drift |q(t) − q(0)| / (1 + |q(0)|) per quantity.

    ``quantities`` may name monitors or map names to scalar fields; the
    default is every monitor the trajectory carries.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if quantities is None:
        quantities = [k for k, v in traj.monitors.items() if v is not None and k != "div_vH"]
    if not isinstance(quantities, dict):
        quantities = {name: None for name in quantities}
    out = {}
    for name, fld in quantities.items():
        series = traj.monitors.get(name) if fld is None else scalar(fld)(traj.states)
        if series is None:
            continue
        series = np.asarray(series, dtype=float)
        out[name] = float(np.max(np.abs(series - series[0])) / (1.0 + abs(series[0])))
    return out


@dataclass(frozen=True)
class EnergyBalance:
    observed: np.ndarray     # H(t_k) − H(0) at the Simpson nodes
    predicted: np.ndarray    # ∫_0^{t_k} H E(H) dt
    times: np.ndarray

    @property
    def max_discrepancy(self) -> float:
        return float(np.max(np.abs(self.observed - self.predicted)))


def energy_balance(traj: Trajectory, J: JacobiStructure, H) -> EnergyBalance:
    """Check dH/dt = H E(H) by composite Simpson quadrature along the flow.

    Needs a uniform output grid with an even number of intervals.
    """
    t = traj.times
    n = len(t) - 1
    dt = np.diff(t)
    if n < 2 or n % 2 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("energy balance needs a uniform grid with an even number of intervals")
    H = scalar(H)
    Hv, rate = evaluate_fields([H, H * dot(J.E, grad(H))], traj.states)
    h = dt[0]
    pieces = h / 3 * (rate[0:-1:2] + 4 * rate[1::2] + rate[2::2])
    predicted = np.concatenate([[0.0], np.cumsum(pieces)])
    return EnergyBalance(Hv[::2] - Hv[0], predicted, t[::2])


# ---------------------------------------------------------------------------
# divergence and the homomorphism property


def divergence_formula(J: JacobiStructure, H, convention: str = "sharp") -> ScalarField:
    """Closed form of ∇·v_H for the structure's kind."""
    H = scalar(H)
    gH = grad(H)
    sgn = 1 if convention == "sharp" else -1
    k = J.kind
    if isinstance(k, Rank3):
        grad_phi = k.grad_phi
        if convention == "sharp":
            # v_H is the E of (HA), whose φ is φ + 2 ln|H|
            grad_phi = grad_phi + scale(2 / H, gH)
        elif convention != "grad_cross":
            raise ValueError(f"unknown convention {convention!r}")
        return dot(grad_phi, curl(scale(H, J.A)))
    if isinstance(k, Rank2):
        gmu, gpsi = grad(k.mu), grad(k.psi)
        w = cross(grad(k.xi1), grad(k.xi2))
        if convention == "grad_cross":
            return -dot(grad(k.mu * H), w)
        return (2 * dot(gH, cross(gmu, gpsi)) - k.mu * dot(gH, w) - H * dot(gmu, w))
    if isinstance(k, Poisson):
        return sgn * dot(gH, cross(grad(k.mu), grad(k.psi)))
    raise WrongKind(f"no closed-form divergence for a {J.kind_name} structure")


def divergence_check(J: JacobiStructure, H, points, convention: str = "sharp") -> Summary:
    """|∇·v_H computed directly − closed form| at the points."""
    formula = divergence_formula(J, H, convention)
    direct = div(hamiltonian_field(J, H, convention))
    a, b = evaluate_fields([direct, formula], points)
    return Summary.of(a - b)


def lie_bracket(X: VectorField3, Y: VectorField3) -> VectorField3:
    """[X, Y]^i = X·∇Y^i − Y·∇X^i."""
    X, Y = vector(X), vector(Y)
    comps = [dot(X, grad(ScalarField(Y[i]))) - dot(Y, grad(ScalarField(X[i]))) for i in range(3)]
    return VectorField3(tuple(c.expr for c in comps))


def lie_homomorphism_residual(J: JacobiStructure, f, g, points, convention: str = "sharp") -> Summary:
    vfg = hamiltonian_field(J, bracket(J, f, g), convention)
    comm = lie_bracket(hamiltonian_field(J, f, convention), hamiltonian_field(J, g, convention))
    values = (vfg - comm)(points)
    return Summary.of(np.abs(values).max(axis=1))


# ---------------------------------------------------------------------------
# force-free fields


def abc_field(a: float, b: float, c: float) -> VectorField3:
    """(a sin z + c cos y, b sin x + a cos z, c sin y + b cos x)."""
    if min(a, b, c) < 0:
        raise ValueError("ABC parameters must be non-negative")
    A, B, C = (Const(float(p)) for p in (a, b, c))
    sx, sy, sz = (func("sin", w) for w in (X, Y, Z))
    cx, cy, cz = (func("cos", w) for w in (X, Y, Z))
    return VectorField3((
        add(mul(A, sz), mul(C, cy)),
        add(mul(B, sx), mul(A, cz)),
        add(mul(C, sy), mul(B, cx)),
    ))


def force_free_residual(A, lam, points) -> Summary:
    """max component of |∇×A − λA|."""
    A = vector(A)
    r = curl(A) - scale(lam, A)
    return Summary.of(np.abs(r(points)).max(axis=1))
