"""Shape-constrained estimators."""

from .convex_density import check_convex_density_characterization, fit_convex_density_lse
from .convex_lse import (
    CharacterizationReport,
    SolverOptions,
    characterization_tolerance,
    check_lse_characterization,
    fit_convex_lse,
)
from .log_concave import LogConcaveFit, check_logconcave_characterization, fit_log_concave_mle

__all__ = [
    "CharacterizationReport",
    "LogConcaveFit",
    "SolverOptions",
    "characterization_tolerance",
    "check_convex_density_characterization",
    "check_logconcave_characterization",
    "check_lse_characterization",
    "fit_convex_density_lse",
    "fit_convex_lse",
    "fit_log_concave_mle",
]
