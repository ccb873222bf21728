"""Monte Carlo machinery: truths, random streams, limit-law tables and coverage runs."""

from .coverage_harness import (
    CoverageReport,
    CoverageRow,
    ExperimentConfig,
    length_rate_check,
    oracle_ci_length,
    run_coverage,
)
from .executor import ProgressCallback, run_ordered
from .limit_sim import (
    LNESample,
    SimulationConfig,
    build_full_table,
    build_oracle_table,
    build_pivotal_table,
    ks_distance,
    ks_threshold,
    simulate_lne_sample,
    simulate_lne_samples,
    simulate_oracle_table,
    simulate_pivotal_table,
    symmetry_band,
    write_ecdf_csv,
)
from .truths import DensityTruth, RegressionTruth, Truth, TruthKind, TruthRegistry

__all__ = [
    "CoverageReport",
    "CoverageRow",
    "DensityTruth",
    "ExperimentConfig",
    "LNESample",
    "ProgressCallback",
    "RegressionTruth",
    "SimulationConfig",
    "Truth",
    "TruthKind",
    "TruthRegistry",
    "build_full_table",
    "build_oracle_table",
    "build_pivotal_table",
    "ks_distance",
    "ks_threshold",
    "length_rate_check",
    "oracle_ci_length",
    "run_coverage",
    "run_ordered",
    "simulate_lne_sample",
    "simulate_lne_samples",
    "simulate_oracle_table",
    "simulate_pivotal_table",
    "symmetry_band",
    "write_ecdf_csv",
]
