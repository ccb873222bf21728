"""Coverage and length experiments for the LNE confidence intervals.

For every sample size of the grid, R independent data sets are drawn from a
named truth, fitted, and turned into confidence intervals for each requested
target and level. Coverage is the binomial proportion of intervals containing
the true parameter among replications that completed. Every fit must pass the
characterization check of its estimator; failed or uncertified fits are counted
separately and invalidate the report once they exceed 1%.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config.validation import validate_level, validate_n_grid
from ..core.data import RegressionData, SampleData
from ..core.errors import (
    CharacterizationError,
    CoverageInvalidError,
    InvalidInputError,
    InvariantViolationError,
    MissingStatisticError,
)
from ..core.metrics import MetricsCollector
from ..core.piecewise import linear_piece_containing, mode_bracket
from ..estimators.convex_density import (
    check_convex_density_characterization,
    fit_convex_density_lse,
)
from ..estimators.convex_lse import (
    SolverOptions,
    characterization_tolerance,
    check_lse_characterization,
    fit_convex_lse,
)
from ..estimators.log_concave import check_logconcave_characterization, fit_log_concave_mle
from ..inference.pivotal_ci import (
    NONNEGATIVE,
    ConfidenceInterval,
    NuisanceScale,
    Target,
    ci_derivative,
    ci_mode,
    ci_value,
    estimate_sigma,
    nuisance_a_random_design,
    nuisance_density,
    nuisance_logconcave,
)
from ..inference.tables import CriticalValueTable, Statistic
from .executor import ProgressCallback, run_ordered
from .streams import normal_variates, replication_generator, uniform_variates
from .truths import DensityTruth, Truth, TruthKind, TruthRegistry

logger = logging.getLogger(__name__)

Model = Literal["convex-regression", "log-concave", "convex-density"]

MAX_FAILURE_RATE = 0.01
SPOT_CHECK_EVERY = 100
DEFAULT_N_GRID = (100, 200, 500, 1000, 2000)

_MODEL_KIND = {
    "convex-regression": TruthKind.REGRESSION,
    "log-concave": TruthKind.LOG_CONCAVE,
    "convex-density": TruthKind.CONVEX_DENSITY,
}
_DEFAULT_TRUTH = {
    "convex-regression": "circle",
    "log-concave": "beta",
    "convex-density": "exponential",
}
_ORACLE_STATISTIC = {
    Target.VALUE: Statistic.ABS_H2,
    Target.DERIVATIVE: Statistic.ABS_H3,
    Target.MODE: Statistic.ABS_H2_MODE,
}


def _split_list(v: Any) -> Any:
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    if isinstance(v, int | float):
        return [v]
    return v


class ExperimentConfig(BaseModel):
    """Coverage experiment definition (unknown keys are rejected)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: Model = "convex-regression"
    f0: str | None = Field(default=None, description="Truth spec; per-model default if omitted")
    x0: float | None = Field(default=None, description="Evaluation point; see fill_truth_defaults")
    targets: list[Target] = Field(
        default_factory=lambda: [Target.VALUE, Target.DERIVATIVE, Target.MODE]
    )
    n_grid: list[int] = Field(default_factory=lambda: list(DEFAULT_N_GRID))
    replications: int = Field(default=1000, ge=1)
    level: list[float] = Field(default_factory=lambda: [0.95])
    seed: int = Field(default=20240101, ge=0)
    sigma: float = Field(default=1.0, ge=0.0, description="Noise level of the regression model")
    sigma_mode: Literal["known", "estimated"] = "known"
    design: Literal["fixed", "uniform"] = "fixed"
    table: Path | None = None
    workers: int = Field(default=1, ge=1, le=512)

    @field_validator("targets", "n_grid", "level", mode="before")
    @classmethod
    def split_comma_lists(cls, v: Any) -> Any:
        return _split_list(v)

    @field_validator("n_grid")
    @classmethod
    def check_n_grid(cls, v: list[int]) -> list[int]:
        validate_n_grid(v, minimum=3)
        return v

    @field_validator("level")
    @classmethod
    def check_levels(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("At least one confidence level is required")
        for level in v:
            validate_level(level)
        return v

    @model_validator(mode="before")
    @classmethod
    def fill_truth_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        filled = dict(data)
        model = filled.get("model") or "convex-regression"
        if model not in _DEFAULT_TRUTH:
            return filled
        if not filled.get("f0"):
            filled["f0"] = _DEFAULT_TRUTH[model]
        if filled.get("x0") in (None, ""):
            truth = TruthRegistry.create(str(filled["f0"]))
            # A convex density peaks at the boundary 0; the median is the default instead.
            if isinstance(truth, DensityTruth) and truth.kind is TruthKind.CONVEX_DENSITY:
                filled["x0"] = float(truth.distribution.median())
            else:
                filled["x0"] = truth.mode
        return filled

    @model_validator(mode="after")
    def check_truth(self) -> ExperimentConfig:
        truth = self.truth
        if truth.kind is not _MODEL_KIND[self.model]:
            raise ValueError(
                f"Truth '{self.f0}' is {truth.kind.value}, model {self.model} needs "
                f"{_MODEL_KIND[self.model].value}"
            )
        if self.model == "convex-density" and Target.MODE in self.targets:
            raise ValueError("The convex-density model supports value and derivative targets only")
        if not self.targets:
            raise ValueError("At least one target is required")
        x0 = float(self.x0) if self.x0 is not None else truth.mode
        needs_x0 = any(t is not Target.MODE for t in self.targets)
        if needs_x0 and self.model == "convex-density" and x0 <= 0:
            raise ValueError(f"The convex-density model needs x0 > 0, got {x0}")
        if needs_x0 and self.model == "convex-regression" and not 0.0 < x0 < 1.0:
            raise ValueError(f"x0 must lie strictly inside (0, 1), got {x0}")
        return self

    @property
    def truth(self) -> Truth:
        return TruthRegistry.create(self.f0 or _DEFAULT_TRUTH[self.model])

    @property
    def deltas(self) -> list[float]:
        return [1.0 - level for level in self.level]


@dataclass(frozen=True)
class CoverageRow:
    """Aggregated result for one (target, n, level) cell."""

    model: str
    target: str
    n: int
    R: int
    level: float
    coverage: float
    se: float
    len_q25: float
    len_q50: float
    len_q75: float
    oracle_len: float
    failures: int


@dataclass
class CoverageReport:
    """Coverage rows plus the configuration that produced them."""

    config: ExperimentConfig
    rows: list[CoverageRow] = field(default_factory=list)
    failures: int = 0
    attempted: int = 0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.attempted if self.attempted else 0.0

    def row(self, target: Target | str, n: int, level: float | None = None) -> CoverageRow:
        wanted = Target(target).value
        for row in self.rows:
            if row.target == wanted and row.n == n and (level is None or row.level == level):
                return row
        raise KeyError(f"No row for target={wanted}, n={n}, level={level}")

    def to_frame(self) -> pd.DataFrame:
        columns = [f.name for f in fields(CoverageRow)]
        return pd.DataFrame([asdict(r) for r in self.rows], columns=columns)

    def to_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "attempted": self.attempted,
            "failures": self.failures,
            "rows": [asdict(r) for r in self.rows],
        }


@dataclass(frozen=True)
class _Record:
    target: str
    delta: float
    covered: bool
    length: float


@dataclass(frozen=True)
class _Outcome:
    n: int
    index: int
    records: tuple[_Record, ...] | None
    error: str | None = None
    invariant_error: str | None = None


def _check_invariants(narrow: ConfidenceInterval, wide: ConfidenceInterval) -> None:
    if not wide.covers(narrow):
        raise InvariantViolationError(
            f"{narrow.target.value} interval at level {narrow.level} is not nested in the "
            f"interval at level {wide.level}"
        )
    if not narrow.clamped:
        half = (narrow.upper - narrow.lower) / 2.0
        if not math.isclose(narrow.midpoint, narrow.estimate, rel_tol=1e-12, abs_tol=1e-12 * half):
            raise InvariantViolationError(
                f"{narrow.target.value} interval midpoint {narrow.midpoint} differs from the "
                f"estimate {narrow.estimate}"
            )


def _spot_check(
    replication: _Replication, ci: ConfidenceInterval, target: Target, delta: float
) -> None:
    try:
        wide = replication.interval(target, delta / 2.0)
    except MissingStatisticError:
        # The table may stop at delta; nesting is then checked on the next level only.
        logger.debug("No critical value at delta=%s; skipping the nesting check", delta / 2.0)
        return
    _check_invariants(ci, wide)


class _Replication:
    """Fit of one simulated data set and the interval builders that go with it."""

    def __init__(
        self,
        config: ExperimentConfig,
        n: int,
        index: int,
        table: CriticalValueTable,
        options: SolverOptions | None,
    ):
        self.config = config
        self.table = table
        self.n = n
        truth = config.truth
        self.truth = truth
        rng = replication_generator(config.seed, n, index)
        x0 = float(config.x0) if config.x0 is not None else truth.mode
        self.x0 = x0
        needs_piece = any(t is not Target.MODE for t in config.targets)

        if config.model == "convex-regression":
            if config.design == "fixed":
                x = np.arange(1, n + 1, dtype=np.float64) / n
            else:
                x = np.sort(uniform_variates(rng, n))
            data = RegressionData(x, truth.value(x) + normal_variates(rng, n, config.sigma))
            fit = fit_convex_lse(data, options)
            char_rtol = (options or SolverOptions()).char_rtol
            check_lse_characterization(
                fit, data, characterization_tolerance(data, char_rtol)
            ).require_passed(config.model)
            self.fit: Any = fit
            self.piece = linear_piece_containing(fit, x0) if needs_piece else None
            sigma = config.sigma if config.sigma_mode == "known" else estimate_sigma(data)
            if self.piece is not None and config.design == "uniform":
                self.scale = nuisance_a_random_design(data, self.piece, sigma)
            else:
                self.scale = NuisanceScale(a_hat=sigma, source=config.sigma_mode)
            self.bracket = mode_bracket(fit) if Target.MODE in config.targets else None
            self.value_domain: tuple[float, float] | None = None
            self.mode_domain: tuple[float, float] | None = (float(x[0]), float(x[-1]))
        else:
            assert isinstance(truth, DensityTruth)
            sample = SampleData(truth.sample(n, rng))
            self.value_domain = NONNEGATIVE
            self.mode_domain = None
            if config.model == "log-concave":
                lc_fit = fit_log_concave_mle(sample, options)
                check_logconcave_characterization(lc_fit, sample).require_passed(config.model)
                self.fit = lc_fit
                self.piece = lc_fit.linear_piece_containing(x0) if needs_piece else None
                self.scale = nuisance_logconcave(lc_fit, x0) if needs_piece else NuisanceScale(0.0)
                self.bracket = lc_fit.mode_bracket() if Target.MODE in config.targets else None
            else:
                cd_fit = fit_convex_density_lse(sample, options)
                check_convex_density_characterization(cd_fit, sample).require_passed(config.model)
                self.fit = cd_fit
                self.piece = linear_piece_containing(cd_fit, x0)
                self.scale = nuisance_density(cd_fit, x0)
                self.bracket = None

    def interval(self, target: Target, delta: float) -> ConfidenceInterval:
        if target is Target.MODE:
            assert self.bracket is not None
            return ci_mode(self.bracket, delta, self.table, self.mode_domain)
        assert self.piece is not None
        if target is Target.VALUE:
            return ci_value(
                self.fit,
                self.piece,
                self.x0,
                self.n,
                self.scale,
                delta,
                self.table,
                self.value_domain,
            )
        return ci_derivative(self.fit, self.piece, self.x0, self.n, self.scale, delta, self.table)

    def truth_parameter(self, target: Target) -> float:
        if target is Target.VALUE:
            return float(self.truth.value(self.x0))
        if target is Target.DERIVATIVE:
            return float(self.truth.first_derivative(self.x0))
        return self.truth.mode


def _coverage_task(
    task: tuple[ExperimentConfig, CriticalValueTable, SolverOptions | None, int, int],
) -> _Outcome:
    config, table, options, n, index = task
    try:
        replication = _Replication(config, n, index, table, options)
        records: list[_Record] = []
        for target in config.targets:
            truth_value = replication.truth_parameter(target)
            for delta in config.deltas:
                ci = replication.interval(target, delta)
                records.append(_Record(target.value, delta, ci.contains(truth_value), ci.length))
                if index % SPOT_CHECK_EVERY == 0:
                    _spot_check(replication, ci, target, delta)
    except CharacterizationError as e:
        # Uncertified fits are dropped like failed ones and count against the failure rate.
        return _Outcome(n, index, None, error=f"{type(e).__name__}: {e}")
    except InvariantViolationError as e:
        return _Outcome(n, index, None, invariant_error=str(e))
    except Exception as e:
        return _Outcome(n, index, None, error=f"{type(e).__name__}: {e}")
    return _Outcome(n, index, tuple(records))


def oracle_ci_length(
    truth: Truth | str,
    point: float,
    n: int,
    sigma: float,
    delta: float,
    table: CriticalValueTable,
    target: Target | str,
) -> float:
    """
    Length 2 * d * rate * c_delta of the oracle interval.

    The constant d and the rate depend on the truth's model: regression uses
    (n / sigma^2)^(-2/5) or (n / sigma^2)^(-1/5), the density models n^(-2/5) or
    n^(-1/5). ``point`` is x0 for value and derivative targets and the mode for
    the mode target.

    Raises:
        InvalidInputError: If the curvature at ``point`` is missing or not positive
    """
    f0 = TruthRegistry.create(truth) if isinstance(truth, str) else truth
    tgt = Target(target)
    curvature = float(f0.second_derivative(point))
    if not math.isfinite(curvature):
        raise InvalidInputError(f"Oracle length needs the curvature at {point}, got {curvature}")

    if f0.kind is TruthKind.REGRESSION:
        if curvature <= 0 or sigma <= 0:
            raise InvalidInputError(
                f"Oracle length needs f0'' > 0 and sigma > 0, got f0''={curvature}, sigma={sigma}"
            )
        ratio = n / sigma**2
        if tgt is Target.VALUE:
            d, rate = (curvature / 24.0) ** 0.2, ratio**-0.4
        elif tgt is Target.DERIVATIVE:
            d, rate = (curvature / 24.0) ** 0.6, ratio**-0.2
        else:
            d, rate = (24.0 / curvature) ** 0.4, ratio**-0.2
    elif f0.kind is TruthKind.LOG_CONCAVE:
        assert isinstance(f0, DensityTruth)
        dens = float(f0.value(point))
        if tgt is Target.MODE:
            if curvature >= 0:
                raise InvalidInputError(f"Oracle length needs f0''(m0) < 0, got {curvature}")
            d, rate = (24.0**2 * dens / curvature**2) ** 0.2, n**-0.2
        else:
            phi2 = abs(float(f0.log_second_derivative(point)))
            if not (math.isfinite(phi2) and phi2 > 0):
                raise InvalidInputError(f"Oracle length needs phi0''({point}) < 0")
            if tgt is Target.VALUE:
                d, rate = (dens**3 * phi2 / 24.0) ** 0.2, n**-0.4
            else:
                d, rate = (dens**4 * phi2**3 / 24.0**3) ** 0.2, n**-0.2
    else:
        if curvature <= 0:
            raise InvalidInputError(f"Oracle length needs f0'' > 0 at {point}, got {curvature}")
        if tgt is Target.MODE:
            raise InvalidInputError("Convex densities have no interior mode")
        dens = float(f0.value(point))
        if tgt is Target.VALUE:
            d, rate = (dens**2 * curvature / 24.0) ** 0.2, n**-0.4
        else:
            d, rate = (dens * curvature**3 / 24.0**3) ** 0.2, n**-0.2

    return 2.0 * d * rate * table.quantile(_ORACLE_STATISTIC[tgt], delta)


def _oracle_or_nan(
    config: ExperimentConfig, target: Target, n: int, delta: float, table: CriticalValueTable
) -> float:
    truth = config.truth
    point = truth.mode if target is Target.MODE else float(config.x0)  # type: ignore[arg-type]
    try:
        return oracle_ci_length(truth, point, n, config.sigma, delta, table, target)
    except InvalidInputError as e:
        logger.warning("No oracle length for %s at n=%d: %s", target.value, n, e)
        return math.nan


def run_coverage(
    config: ExperimentConfig,
    table: CriticalValueTable | None = None,
    options: SolverOptions | None = None,
    progress_callback: ProgressCallback | None = None,
    metrics: MetricsCollector | None = None,
) -> CoverageReport:
    """
    Run the experiment.

    Args:
        config: Experiment definition
        table: Critical values (pivotal and oracle); the builtin table when omitted
        options: Solver options
        progress_callback: Optional (completed, message) callback
        metrics: Optional collector for failure counters

    Returns:
        CoverageReport with one row per (target, n, level)

    Raises:
        InvariantViolationError: If a spot-checked interval is not nested or not symmetric
        CoverageInvalidError: If more than 1% of the replications failed
    """
    tbl = table or CriticalValueTable.builtin()
    for target in config.targets:
        stat = {Target.VALUE: Statistic.ABS_L0, Target.DERIVATIVE: Statistic.ABS_L1}.get(
            target, Statistic.ABS_M
        )
        for delta in config.deltas:
            tbl.quantile(stat, delta)

    tasks = [
        (config, tbl, options, n, index)
        for n in config.n_grid
        for index in range(config.replications)
    ]
    logger.info(
        "Coverage run: model=%s f0=%s x0=%s targets=%s n=%s R=%d levels=%s",
        config.model,
        config.f0,
        config.x0,
        [t.value for t in config.targets],
        config.n_grid,
        config.replications,
        config.level,
    )
    outcomes = run_ordered(_coverage_task, tasks, config.workers, progress_callback)

    report = CoverageReport(config=config, attempted=len(outcomes))
    for outcome in outcomes:
        if outcome.invariant_error is not None:
            raise InvariantViolationError(
                f"n={outcome.n}, replication {outcome.index}: {outcome.invariant_error}"
            )
        if outcome.records is None:
            report.failures += 1
            logger.warning(
                "Replication %d at n=%d failed: %s", outcome.index, outcome.n, outcome.error
            )
            if metrics is not None:
                metrics.increment("replication_failures", labels={"n": str(outcome.n)})
                if (outcome.error or "").startswith(CharacterizationError.__name__):
                    metrics.increment("characterization_failures", labels={"n": str(outcome.n)})

    for n in config.n_grid:
        done = [o for o in outcomes if o.n == n and o.records is not None]
        failed = sum(1 for o in outcomes if o.n == n and o.records is None)
        for target in config.targets:
            for level, delta in zip(config.level, config.deltas, strict=True):
                cells = [
                    r
                    for o in done
                    for r in o.records or ()
                    if r.target == target.value and r.delta == delta
                ]
                report.rows.append(_aggregate(config, target, n, level, delta, cells, failed, tbl))

    if report.failure_rate > MAX_FAILURE_RATE:
        raise CoverageInvalidError(
            f"{report.failures} of {report.attempted} replications failed "
            f"({report.failure_rate:.1%} > {MAX_FAILURE_RATE:.0%})",
            report=report,
        )
    return report


def _aggregate(
    config: ExperimentConfig,
    target: Target,
    n: int,
    level: float,
    delta: float,
    cells: Sequence[_Record],
    failed: int,
    table: CriticalValueTable,
) -> CoverageRow:
    completed = len(cells)
    if completed:
        coverage = sum(r.covered for r in cells) / completed
        q25, q50, q75 = np.quantile([r.length for r in cells], [0.25, 0.5, 0.75])
    else:
        coverage, q25, q50, q75 = math.nan, math.nan, math.nan, math.nan
    se = math.sqrt(coverage * (1.0 - coverage) / completed) if completed else math.nan
    return CoverageRow(
        model=config.model,
        target=target.value,
        n=n,
        R=completed,
        level=level,
        coverage=coverage,
        se=se,
        len_q25=float(q25),
        len_q50=float(q50),
        len_q75=float(q75),
        oracle_len=_oracle_or_nan(config, target, n, delta, table),
        failures=failed,
    )


def length_rate_check(
    report: CoverageReport, target: Target | str, level: float | None = None
) -> float:
    """
    Least-squares slope of log(median length) against log(n).

    Raises:
        InvalidInputError: If fewer than 3 distinct n have a positive median length
    """
    tgt = Target(target).value
    wanted = report.config.level[0] if level is None else level
    points = sorted(
        (row.n, row.len_q50)
        for row in report.rows
        if row.target == tgt and row.level == wanted and math.isfinite(row.len_q50)
    )
    ns = np.array([p[0] for p in points], dtype=np.float64)
    lengths = np.array([p[1] for p in points], dtype=np.float64)
    if np.unique(ns).size < 3 or np.any(lengths <= 0):
        raise InvalidInputError(
            f"Length-rate check needs >= 3 distinct n with positive median lengths, got {points}"
        )
    slope, _ = np.polyfit(np.log(ns), np.log(lengths), 1)
    return float(slope)
