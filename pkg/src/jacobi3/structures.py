"""Jacobi structures on R^3.

A structure is a pair (A, E): the bivector is encoded by A through
Λ^{ij} = ε_{ijk} A^k and E is the Reeb-like vector field. The pair is a
Jacobi structure iff

    A·(∇×A − E) = 0
    E×(∇×A) + A ∇·E − ∇(A·E) = 0

which is what :func:`verify` evaluates.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateHelicity, DegenerateInput
from .exprcalc import ZERO, CompiledExprs, Expr, as_expr, diff, func, mul, parse, substitute, variables
from .sampling import SampleDomain
from .vfield import (
    ZERO_VECTOR,
    ScalarField,
    VectorField3,
    cross,
    curl,
    div,
    dot,
    evaluate_fields,
    grad,
    helicity,
    scalar,
    scale,
    vector,
)

#: |h| below this at a sample point makes a rank-3 build fail
HELICITY_FLOOR = 1e-10
#: |μ|, |∇ψ| or |λ| below this at a sample point counts as vanishing
DEGENERACY_FLOOR = 1e-10


@dataclass(frozen=True)
class Rank3:
    helicity: ScalarField
    grad_phi: VectorField3
    phi: ScalarField


@dataclass(frozen=True)
class Rank2:
    mu: ScalarField
    xi1: ScalarField
    xi2: ScalarField
    psi_hat: Expr
    psi: ScalarField


@dataclass(frozen=True)
class Poisson:
    mu: ScalarField
    psi: ScalarField


@dataclass(frozen=True)
class Custom:
    note: str = ""


@dataclass(frozen=True, eq=False)
class JacobiStructure:
    A: VectorField3
    E: VectorField3
    kind: object = field(default_factory=Custom)
    domain: SampleDomain | None = None

    @property
    def kind_name(self) -> str:
        return type(self.kind).__name__.lower()

    @cached_property
    def curl_A(self) -> VectorField3:
        return curl(self.A)

    @cached_property
    def residual_fields(self) -> tuple:
        """(r1, r2) as symbolic fields."""
        A, E, cA = self.A, self.E, self.curl_A
        r1 = dot(A, cA - E)
        r2 = cross(E, cA) + scale(div(E), A) - grad(dot(A, E))
        return r1, r2


class Rank(enum.Enum):
    RANK3 = "rank3"
    RANK2 = "rank2"
    DEGENERATE = "degenerate"
    MIXED = "mixed"


@dataclass(frozen=True)
class Summary:
    max_abs: float
    mean_abs: float
    points_checked: int

    @classmethod
    def of(cls, values) -> "Summary":
        a = np.abs(np.asarray(values, dtype=float))
        return cls(float(a.max()), float(a.mean()), int(a.size))


@dataclass(frozen=True)
class ResidualReport:
    points: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    scale: np.ndarray
    summary: Summary

    @property
    def max_scaled(self) -> float:
        """Max residual divided by 1 + |A|(1 + |∇×A| + |E|) pointwise."""
        return float(np.max(self.magnitude / self.scale))

    @property
    def magnitude(self) -> np.ndarray:
        return np.maximum(np.abs(self.r1), np.abs(self.r2).max(axis=1))

    @property
    def records(self):
        for p, r1, r2 in zip(self.points, self.r1, self.r2):
            yield {"point": tuple(p), "r1": float(r1), "r2": tuple(float(c) for c in r2)}


# ---------------------------------------------------------------------------
# construction


def _sample(domain: SampleDomain | None) -> np.ndarray | None:
    return None if domain is None else domain.points()


def build_rank3(A, domain: SampleDomain | None = None) -> JacobiStructure:
    """Rank-3 structure from any A with A·∇×A ≠ 0.

    E = ∇×A − ∇φ×A with ∇φ = ∇h/h, h = A·∇×A; this is e^φ ∇×(e^{−φ}A)
    without ever taking a logarithm, so negative h works too.
    """
    A = vector(A)
    h = helicity(A)
    pts = _sample(domain)
    if pts is not None:
        values = h(pts)
        small = np.abs(values) < HELICITY_FLOOR
        if small.any():
            p = pts[np.argmax(small)]
            raise DegenerateHelicity(f"A·∇×A = {values[np.argmax(small)]:.3g} at {tuple(p)}", p)
        if values.min() < 0 < values.max():
            p, q = pts[np.argmin(values)], pts[np.argmax(values)]
            raise DegenerateHelicity(f"A·∇×A changes sign between {tuple(p)} and {tuple(q)}", p)
    grad_phi = scale(1 / h, grad(h))
    E = curl(A) - cross(grad_phi, A)
    kind = Rank3(helicity=h, grad_phi=grad_phi, phi=ScalarField(func("ln", func("abs", h.expr))))
    return JacobiStructure(A, E, kind, domain)


def _check_nonzero(label, values, pts):
    bad = np.abs(values) < DEGENERACY_FLOOR
    if bad.any():
        p = pts[np.argmax(bad)]
        raise DegenerateInput(f"{label} vanishes at {tuple(p)}", p)


def compose_psi(psi_hat, xi1, xi2) -> ScalarField:
    """ψ = ψ̂(ξ₁, ξ₂) with ψ̂ written in the variables u, v."""
    psi_hat = _psi_hat_expr(psi_hat)
    return ScalarField(substitute(substitute(psi_hat, "u", scalar(xi1).expr), "v", scalar(xi2).expr))


def _psi_hat_expr(psi_hat) -> Expr:
    e = parse(psi_hat, ("u", "v")) if isinstance(psi_hat, str) else as_expr(psi_hat)
    extra = variables(e) - {"u", "v"}
    if extra:
        raise ValueError(f"psi_hat may only use u, v (found {sorted(extra)})")
    return e


def build_rank2(mu, xi1, xi2, psi_hat, domain: SampleDomain | None = None) -> JacobiStructure:
    """Rank-2 structure A = μ∇ψ, E = ∇μ×∇ψ − μ∇ξ₁×∇ξ₂ with ψ = ψ̂(ξ₁, ξ₂)."""
    mu, xi1, xi2 = scalar(mu), scalar(xi1), scalar(xi2)
    psi_hat = _psi_hat_expr(psi_hat)
    psi = compose_psi(psi_hat, xi1, xi2)
    grad_psi = grad(psi)
    _check_mu_psi(mu, grad_psi, domain)
    A = scale(mu, grad_psi)
    E = cross(grad(mu), grad_psi) - scale(mu, cross(grad(xi1), grad(xi2)))
    return JacobiStructure(A, E, Rank2(mu, xi1, xi2, psi_hat, psi), domain)


def _check_mu_psi(mu, grad_psi, domain):
    pts = _sample(domain)
    if pts is None:
        return
    mu_v, gpsi = evaluate_fields([mu, grad_psi], pts)
    _check_nonzero("mu", mu_v, pts)
    _check_nonzero("grad psi", np.linalg.norm(gpsi, axis=1), pts)


def build_poisson(mu, psi, domain: SampleDomain | None = None) -> JacobiStructure:
    mu, psi = scalar(mu), scalar(psi)
    grad_psi = grad(psi)
    _check_mu_psi(mu, grad_psi, domain)
    return JacobiStructure(scale(mu, grad_psi), ZERO_VECTOR, Poisson(mu, psi), domain)


def build_custom(A, E, domain: SampleDomain | None = None, note: str = "") -> JacobiStructure:
    """Store (A, E) verbatim. Nothing is claimed until :func:`verify` runs."""
    return JacobiStructure(vector(A), vector(E), Custom(note), domain)


# ---------------------------------------------------------------------------
# bracket and identities


def bracket(J: JacobiStructure, f, g) -> ScalarField:
    """{f,g} = A·(∇f×∇g) + f E·∇g − g E·∇f."""
    f, g = scalar(f), scalar(g)
    gf, gg = grad(f), grad(g)
    return dot(J.A, cross(gf, gg)) + f * dot(J.E, gg) - g * dot(J.E, gf)


def verify(J: JacobiStructure, points) -> ResidualReport:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("verify needs at least one point")
    r1, r2 = J.residual_fields
    r1v, r2v, Av, cAv, Ev = evaluate_fields([r1, r2, J.A, J.curl_A, J.E], pts)
    norm = lambda v: np.linalg.norm(v, axis=1)
    scale_ = 1.0 + norm(Av) * (1.0 + norm(cAv) + norm(Ev))
    mag = np.maximum(np.abs(r1v), np.abs(r2v).max(axis=1))
    return ResidualReport(pts, r1v, r2v, scale_, Summary.of(mag))


def jacobi_identity_expr(J: JacobiStructure, f, g, h) -> ScalarField:
    b = lambda p, q: bracket(J, p, q)
    return b(b(f, g), h) + b(b(g, h), f) + b(b(h, f), g)


def jacobi_identity_residual(J: JacobiStructure, f, g, h, points) -> Summary:
    """Cyclic sum {{f,g},h} + {{g,h},f} + {{h,f},g} at the points."""
    return Summary.of(jacobi_identity_expr(J, f, g, h)(points))


def first_order_rule_residual(J: JacobiStructure, f, g, h, points) -> Summary:
    """{fg,h} − f{g,h} − {f,h}g + fg{1,h}; zero for any (A, E) whatsoever."""
    f, g, h = scalar(f), scalar(g), scalar(h)
    b = lambda p, q: bracket(J, p, q)
    expr = b(f * g, h) - f * b(g, h) - b(f, h) * g + f * g * b(ScalarField(1), h)
    return Summary.of(expr(points))


def sharp(J: JacobiStructure, zeta) -> VectorField3:
    """Λ♯ζ, i.e. (Λ♯ζ)^j = Λ^{ij} ζ_i = (A×ζ)^j. Its image is the plane ⟂ A."""
    return cross(J.A, vector(zeta))


def classify_rank(J: JacobiStructure, points) -> Rank:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    h, Av, cAv = evaluate_fields([helicity(J.A), J.A, J.curl_A], pts)
    a_norm = np.linalg.norm(Av, axis=1)
    if np.any(a_norm <= 1e-12):
        return Rank.DEGENERATE
    tol = 1e-10 * (1.0 + a_norm * np.linalg.norm(cAv, axis=1))
    big = np.abs(h) > tol
    if big.all():
        return Rank.RANK3
    if not big.any():
        return Rank.RANK2
    return Rank.MIXED


def conformal(J: JacobiStructure, lam, domain: SampleDomain | None = None) -> JacobiStructure:
    """Conformal change Ã = λA, Ẽ = λE + Λ♯(dλ) = λE + A×∇λ.

    For rank-3 input the result is again rank 3 (its E is the one
    build_rank3 would give for λA); other kinds come back as Custom.
    """
    lam = scalar(lam)
    domain = domain or J.domain
    pts = _sample(domain)
    if pts is not None:
        _check_nonzero("lambda", lam(pts), pts)
    A = scale(lam, J.A)
    E = scale(lam, J.E) + cross(J.A, grad(lam))
    if isinstance(J.kind, Rank3):
        h = helicity(A)
        grad_phi = scale(1 / h, grad(h))
        kind = Rank3(h, grad_phi, ScalarField(func("ln", func("abs", h.expr))))
    else:
        kind = Custom(f"conformal image (lambda = {lam}) of a {J.kind_name} structure")
    return JacobiStructure(A, E, kind, domain)


# ---------------------------------------------------------------------------
# Poissonization on R^3 × R


class Poissonization:
    """Π = e^{−t}(Λ + ∂_t∧E) on coordinates (x, y, z, t).

    ``matrix[a][b]`` is Π^{ab} with index 3 standing for t.
    """

    ARGS = ("x", "y", "z", "t")

    def __init__(self, J: JacobiStructure):
        self.structure = J
        damp = func("exp", func("neg", parse("t")))
        A = [mul(damp, c) for c in J.A]
        E = [mul(damp, c) for c in J.E]
        m = [[ZERO] * 4 for _ in range(4)]
        # Λ^{ij} = ε_{ijk} A^k
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            m[i][j] = A[k]
            m[j][i] = func("neg", A[k])
        for i in range(3):
            m[3][i] = E[i]
            m[i][3] = func("neg", E[i])
        self.matrix = m

    @cached_property
    def residual_exprs(self) -> list:
        """Σ_m Π^{im}∂_mΠ^{jk} + Π^{jm}∂_mΠ^{ki} + Π^{km}∂_mΠ^{ij} for i<j<k."""
        P = self.matrix
        dP = {(a, b, m): diff(P[a][b], self.ARGS[m]) for a in range(4) for b in range(4) for m in range(4)}
        out = []
        for i, j, k in itertools.combinations(range(4), 3):
            total = ZERO
            for m in range(4):
                total = total + mul(P[i][m], dP[j, k, m]) + mul(P[j][m], dP[k, i, m]) + mul(P[k][m], dP[i, j, m])
            out.append(total)
        return out

    def bivector(self, point4) -> np.ndarray:
        flat = [self.matrix[a][b] for a in range(4) for b in range(4)]
        return CompiledExprs(flat, self.ARGS)(np.atleast_2d(point4))[:, 0].reshape(4, 4)

    def residual(self, points4) -> Summary:
        values = CompiledExprs(self.residual_exprs, self.ARGS)(points4)
        return Summary.of(np.abs(values).max(axis=0))


def poissonize(J: JacobiStructure) -> Poissonization:
    return Poissonization(J)
