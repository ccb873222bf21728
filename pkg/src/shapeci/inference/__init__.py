"""Confidence intervals and critical-value tables."""

from .pivotal_ci import (
    NONNEGATIVE,
    ConfidenceInterval,
    NuisanceScale,
    Target,
    ci_derivative,
    ci_generic,
    ci_mode,
    ci_value,
    estimate_sigma,
    local_design_density,
    nuisance_a_random_design,
    nuisance_deconvolution,
    nuisance_density,
    nuisance_hazard,
    nuisance_logconcave,
)
from .tables import CriticalValueTable, QuantileGrid, Statistic, TableMeta

__all__ = [
    "NONNEGATIVE",
    "ConfidenceInterval",
    "CriticalValueTable",
    "NuisanceScale",
    "QuantileGrid",
    "Statistic",
    "TableMeta",
    "Target",
    "ci_derivative",
    "ci_generic",
    "ci_mode",
    "ci_value",
    "estimate_sigma",
    "local_design_density",
    "nuisance_a_random_design",
    "nuisance_deconvolution",
    "nuisance_density",
    "nuisance_hazard",
    "nuisance_logconcave",
]
