"""Structures shared by the test modules.

Every entry was checked for degeneracy on its box before being frozen
here: |h| stays away from zero for the rank-3 ones, μ and |∇ψ| for the
rank-2 ones.
"""

import numpy as np

from jacobi3.hamflow import abc_field
from jacobi3.sampling import SampleDomain, random_polynomial
from jacobi3.structures import build_poisson, build_rank2, build_rank3

UNIT = SampleDomain((0.1, 0.1, 0.1), (1.4, 1.4, 1.4), 1000, 11)
CUBE = SampleDomain((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5), 1000, 12)
ANNULUS_BOX = SampleDomain((0.5, 0.5, -1.0), (2.0, 2.0, 1.0), 1000, 13)
SLAB = SampleDomain((-1.0, 0.0, -1.0), (1.0, 1.0, 1.0), 1000, 14)


def _perturbed_twist(seed):
    # (−y, x, 1) has h = 2; a small seeded polynomial bump keeps h > 0 on CUBE
    rng = np.random.default_rng(seed)
    bumps = [random_polynomial(rng, degree=2, terms=3) for _ in range(3)]
    base = ["-y", "x", "1"]
    return [f"{b} + 0.1*({p})" for b, p in zip(base, bumps)]


def rank3_cases():
    return {
        "abc111": build_rank3(abc_field(1, 1, 1), UNIT),
        "abc_uneven": build_rank3(abc_field(1, 0.5, 0.25), UNIT),
        "twist": build_rank3(["-y", "x", "1"], CUBE),
        "exp_shear": build_rank3(["-y*exp(x)", "0", "exp(x)"], CUBE),
        "twist_seed7": build_rank3(_perturbed_twist(7), CUBE),
    }


def rank2_cases():
    return {
        "cylinder": build_rank2("1", "x", "y", "u^2 + v^2", ANNULUS_BOX),
        "cylinder_expz": build_rank2("exp(z)", "x", "y", "u^2 + v^2", ANNULUS_BOX),
        "parabolic": build_rank2("1 + 0.5*sin(x)", "x + z", "y", "u + v^2", SLAB),
        "wave": build_rank2("2 + sin(y)", "x", "z + y^2", "sin(u) + v", SLAB),
        "ellipse": build_rank2("exp(x*y/2)", "y", "z - x", "u^2 + 2*v^2 + u", SLAB),
    }


def poisson_cases():
    return {
        "constant": build_poisson("1", "z", CUBE),
        "quadratic": build_poisson("x^2 + 1", "x^2 + y^2", ANNULUS_BOX),
    }


def all_valid():
    out = {}
    for group in (rank3_cases(), rank2_cases(), poisson_cases()):
        out.update(group)
    return out
