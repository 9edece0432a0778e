"""Equilibria and bifurcations of a rotating double pendulum.

Exact polynomial elimination (resultants, Dixon determinants with early
factor detection) over the half-tangent equilibrium equations, plus
floating-point root isolation, equilibrium finding, classification, and
time integration.
"""

from .polyring import (
    ParseError,
    Polynomial,
    VarSet,
    exact_divide,
    multivariate_gcd,
    parse,
)

__version__ = "0.1.0"

__all__ = [
    "VarSet",
    "Polynomial",
    "ParseError",
    "parse",
    "exact_divide",
    "multivariate_gcd",
    "__version__",
]
