"""The contact form θ = e^{−φ} A_i dx^i of a rank-3 structure.

With h = A·∇×A we have e^{−φ} = 1/h, so θ = A/h and

    i_E θ = 1,    i_θ Λ = 0,    θ·(∇×θ) = 1/h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WrongKind
from .structures import JacobiStructure, Rank3, Summary
from .vfield import ScalarField, VectorField3, cross, curl, dot, evaluate_fields, scale


@dataclass(frozen=True)
class ContactForm:
    factor: ScalarField        # e^{−φ} = 1/h
    direction: VectorField3    # A

    @property
    def coefficients(self) -> VectorField3:
        return scale(self.factor, self.direction)

    def __call__(self, points) -> np.ndarray:
        return self.coefficients(points)


def contact_form(J: JacobiStructure) -> ContactForm:
    if not isinstance(J.kind, Rank3):
        raise WrongKind(f"contact form needs a rank-3 structure, got {J.kind_name}")
    return ContactForm(1 / J.kind.helicity, J.A)


def contact_volume(theta: ContactForm) -> ScalarField:
    """Coefficient of θ∧dθ against dx∧dy∧dz, i.e. θ·(∇×θ)."""
    th = theta.coefficients
    return dot(th, curl(th))


def exterior_derivative(theta: ContactForm) -> list:
    """dθ as the antisymmetric matrix (∂_i θ_j − ∂_j θ_i)."""
    th = theta.coefficients
    c = curl(th)
    z = ScalarField(0)
    # (dθ)_{ij} = ε_{ijk} (∇×θ)_k
    return [[z, ScalarField(c[2]), ScalarField(-c[1])],
            [ScalarField(-c[2]), z, ScalarField(c[0])],
            [ScalarField(c[1]), ScalarField(-c[0]), z]]


def reeb_pairing(theta: ContactForm, J: JacobiStructure) -> ScalarField:
    """i_E θ."""
    return dot(theta.coefficients, J.E)


def interior_lambda(theta: ContactForm, J: JacobiStructure) -> VectorField3:
    """i_θ Λ = θ×A, written as (1/h)(A×A).

    Every component has the form a·b − b·a, which is exactly 0.0 in IEEE
    arithmetic, so the check is free of roundoff.
    """
    return scale(theta.factor, cross(theta.direction, J.A))


@dataclass(frozen=True)
class ContactReport:
    reeb: Summary          # |i_E θ − 1|
    volume: Summary        # |θ·∇×θ − 1/h| · |h|   (relative to 1/h)
    interior: Summary      # |θ×A|
    lambda_e: Summary      # |A·E − h| / (1 + |h|)

    def passed(self, tol: float = 1e-10) -> bool:
        return all(s.max_abs <= tol for s in (self.reeb, self.volume, self.interior, self.lambda_e))


def check(J: JacobiStructure, points) -> ContactReport:
    theta = contact_form(J)
    h = J.kind.helicity
    vals = evaluate_fields([reeb_pairing(theta, J), contact_volume(theta), h,
                            interior_lambda(theta, J), dot(J.A, J.E)], points)
    reeb, vol, hv, inter, ae = vals
    return ContactReport(
        reeb=Summary.of(reeb - 1.0),
        volume=Summary.of((vol - 1.0 / hv) * hv),
        interior=Summary.of(np.abs(inter).max(axis=1)),
        lambda_e=Summary.of((ae - hv) / (1.0 + np.abs(hv))),
    )
