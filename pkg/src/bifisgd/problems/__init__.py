"""Concrete bi-fidelity problems: regression, quadratic, topology optimization."""

from .polynomial import (
    ANCHORS,
    NOISE_STD,
    TRUE_COEFFS,
    PolyRegressionOracle,
    gen_observations,
    monomial_basis,
    nearest_anchor,
    poly_high,
    poly_high_d1,
    poly_high_d2,
    poly_low,
    taylor_basis,
)
from .quadratic import QuadraticOracle, quadratic_oracle
from .topopt import TopOptOracle, TopOptProblem, topopt_oracle

__all__ = [
    "ANCHORS",
    "NOISE_STD",
    "TRUE_COEFFS",
    "PolyRegressionOracle",
    "QuadraticOracle",
    "TopOptOracle",
    "TopOptProblem",
    "gen_observations",
    "monomial_basis",
    "nearest_anchor",
    "poly_high",
    "poly_high_d1",
    "poly_high_d2",
    "poly_low",
    "quadratic_oracle",
    "taylor_basis",
    "topopt_oracle",
]
