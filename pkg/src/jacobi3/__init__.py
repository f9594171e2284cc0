"""Jacobi structures on R^3: construction, verification, Casimirs, contact
forms and Hamiltonian flows, on top of a small symbolic expression engine."""

from .errors import (
    ConfigError,
    DegenerateHelicity,
    DegenerateInput,
    EvalDomainError,
    ExprSyntaxError,
    JacobiError,
    StationaryPsi,
    StepFailure,
    TransversalMiss,
    UnknownIdentifier,
    WrongKind,
)
from .exprcalc import diff, parse, simplify, substitute, to_text
from .sampling import SampleDomain
from .structures import (
    JacobiStructure,
    Rank,
    bracket,
    build_custom,
    build_poisson,
    build_rank2,
    build_rank3,
    classify_rank,
    conformal,
    poissonize,
    sharp,
    verify,
)
from .vfield import ScalarField, VectorField3, curl, div, grad, helicity

__all__ = [
    "ConfigError",
    "DegenerateHelicity",
    "DegenerateInput",
    "EvalDomainError",
    "ExprSyntaxError",
    "JacobiError",
    "JacobiStructure",
    "Rank",
    "SampleDomain",
    "ScalarField",
    "StationaryPsi",
    "StepFailure",
    "TransversalMiss",
    "UnknownIdentifier",
    "VectorField3",
    "WrongKind",
    "bracket",
    "build_custom",
    "build_poisson",
    "build_rank2",
    "build_rank3",
    "classify_rank",
    "conformal",
    "curl",
    "diff",
    "div",
    "grad",
    "helicity",
    "parse",
    "poissonize",
    "sharp",
    "simplify",
    "substitute",
    "to_text",
    "verify",
]

__version__ = "0.1.0"
