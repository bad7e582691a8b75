"""Certified brackets for multivariate Laplace-type integrals."""

from .bounds_engine import (
    Bracket,
    GConstants,
    GData,
    RelaxationParams,
    TheoremOneConstants,
    bracket_E_g,
    bracket_I,
    mcw_reference,
    n0_threshold,
    n4_threshold,
    pochhammer,
    solve_xa,
    theorem1_constants,
    theorem2_constants,
    xi,
)
from .local_model import LocalExpansion, NotPositiveDefinite
from .problem_library import (
    DixonSpec,
    Problem,
    dixon2_transformed,
    dixon_exponent,
    dixon_leading,
    dixon_identity,
    dixon_sum_exact,
    resolve,
    separable_cubic,
)

from .oracle import (
    EmpiricalError,
    NoConvergence,
    QuadratureSpec,
    empirical_error,
    integrate_nd,
    integrate_separable,
    odd_moment_check,
    verify_point,
)

__version__ = "0.1.0"

__all__ = [
    "LocalExpansion",
    "NotPositiveDefinite",
    "Bracket",
    "GConstants",
    "GData",
    "RelaxationParams",
    "TheoremOneConstants",
    "bracket_E_g",
    "bracket_I",
    "mcw_reference",
    "n0_threshold",
    "n4_threshold",
    "pochhammer",
    "solve_xa",
    "theorem1_constants",
    "theorem2_constants",
    "xi",
    "DixonSpec",
    "Problem",
    "dixon2_transformed",
    "dixon_exponent",
    "dixon_leading",
    "dixon_identity",
    "dixon_sum_exact",
    "resolve",
    "separable_cubic",
    "EmpiricalError",
    "NoConvergence",
    "QuadratureSpec",
    "empirical_error",
    "integrate_nd",
    "integrate_separable",
    "odd_moment_check",
    "verify_point",
]
