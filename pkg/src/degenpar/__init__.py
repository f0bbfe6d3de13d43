"""Numerical laboratory for du/dt = (|Du|^pt + a|Du|^qt) Lap_p^N u + f."""

__version__ = "0.1.0"

from .core import (CoefficientField, Exponents, IntrinsicCylinder, ScalarField,  # noqa: E402
                   SpaceTimeField, SpaceTimeGrid, cylinder_nodes, make_grid,
                   parabolic_boundary_nodes)
from .operator import (RegularizationPolicy, degeneracy_H, gradient, hessian,  # noqa: E402
                       normalized_p_laplacian, residual)
from .fdsolver import (CFLViolation, DivergenceError, NumericalFailure, SolveConfig,  # noqa: E402
                       solve_cauchy_dirichlet)
from .dpp import DppConfig, dpp_solve, dpp_update, dpp_weights  # noqa: E402
from .exact import affine_solution, heat_reference, sharp_example  # noqa: E402
from .barriers import NonDegBarrier, TimeHolderBarrier, admissible_c, verify_supersolution  # noqa: E402
from .analysis import (dyadic_osc_sequence, fit_growth_exponent, gradient_holder_seminorm,  # noqa: E402
                       holder_seminorm, nondegeneracy_profile, oscillation, plane_detrended_osc,
                       time_holder_seminorm)
from .compare import comparison_audit, perron_bracket, stability_sweep  # noqa: E402

__all__ = [
    "CoefficientField", "Exponents", "IntrinsicCylinder", "ScalarField", "SpaceTimeField", "SpaceTimeGrid",
    "cylinder_nodes", "make_grid", "parabolic_boundary_nodes",
    "RegularizationPolicy", "degeneracy_H", "gradient", "hessian", "normalized_p_laplacian", "residual",
    "CFLViolation", "DivergenceError", "NumericalFailure", "SolveConfig", "solve_cauchy_dirichlet",
    "DppConfig", "dpp_solve", "dpp_update", "dpp_weights",
    "affine_solution", "heat_reference", "sharp_example",
    "NonDegBarrier", "TimeHolderBarrier", "admissible_c", "verify_supersolution",
    "dyadic_osc_sequence", "fit_growth_exponent", "gradient_holder_seminorm", "holder_seminorm",
    "nondegeneracy_profile", "oscillation", "plane_detrended_osc", "time_holder_seminorm",
    "comparison_audit", "perron_bracket", "stability_sweep",
]
