"""Monte Carlo approximation of the pivotal and oracle limit laws.

Each replication draws Y_i = f0(X_i) + sigma * xi_i on a design of n points in
(0, 1], fits the convex LSE and records the locally normalized errors at x0

    t0 = sqrt(n (v - u))   * (f_hat(x0)  - f0(x0))
    t1 = sqrt(n (v - u)^3) * (f_hat'(x0) - f0'(x0))
    tm = (m_hat - m0) / (v_m - u_m)

together with the raw errors, which rescale to the oracle laws when f0'' and
sigma are known. Replications run on independent counter-keyed streams and are
merged in index order, so tables are identical for any worker count.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, cast

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from ..core.data import RegressionData
from ..core.errors import DegenerateGeometryError, InvalidInputError, ReplicationError
from ..core.metrics import MetricsCollector
from ..core.piecewise import linear_piece_containing, mode_bracket
from ..estimators.convex_lse import (
    SolverOptions,
    characterization_tolerance,
    check_lse_characterization,
    fit_convex_lse,
)
from ..inference.tables import CriticalValueTable, Statistic, TableMeta
from .executor import ProgressCallback, run_ordered
from .streams import normal_variates, replication_generator, uniform_variates
from .truths import RegressionTruth, TruthKind, TruthRegistry

logger = logging.getLogger(__name__)

# Two-sample Kolmogorov-Smirnov critical constant at the 1% level.
KS_CRITICAL_1PCT = 1.627


class SimulationConfig(BaseModel):
    """Protocol of one limit-law simulation."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    f0: str = Field(default="quadratic", description="Regression truth spec, e.g. quadratic:c=6")
    x0: float = Field(default=0.5, description="Evaluation point, strictly inside (0, 1)")
    n: int = Field(default=10_000, ge=10, description="Observations per replication")
    B: int = Field(default=10_000, ge=1, description="Number of replications")
    seed: int = Field(default=20240101, ge=0)
    sigma: float = Field(default=1.0, ge=0.0, description="Noise standard deviation")
    design: Literal["fixed", "uniform"] = "fixed"
    workers: int = Field(default=1, ge=1, le=512)

    @field_validator("f0")
    @classmethod
    def check_truth(cls, v: str) -> str:
        truth = TruthRegistry.create(v)
        if truth.kind is not TruthKind.REGRESSION:
            raise ValueError(f"Simulations need a regression truth, '{v}' is {truth.kind.value}")
        return v

    @field_validator("x0")
    @classmethod
    def check_interior(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"x0 must lie strictly inside (0, 1), got {v}")
        return v

    @model_validator(mode="after")
    def warn_off_grid(self) -> SimulationConfig:
        if self.design == "fixed":
            scaled = self.x0 * self.n
            if abs(scaled - round(scaled)) > 1e-9 * self.n:
                logger.warning(
                    "x0=%s is not a design point of the fixed grid i/%d; the anti-mode "
                    "of the truth may also fall between design points",
                    self.x0,
                    self.n,
                )
        return self

    @property
    def truth(self) -> RegressionTruth:
        return cast(RegressionTruth, TruthRegistry.create(self.f0))


@dataclass(frozen=True)
class LNESample:
    """Locally normalized and raw errors of one replication."""

    index: int
    t0: float
    t1: float
    tm: float
    err0: float
    err1: float
    errm: float
    at_kink: bool = False
    iterations: int = 0


@dataclass(frozen=True)
class _Outcome:
    index: int
    sample: LNESample | None
    error: str | None
    seconds: float


def design_points(config: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    """Fixed design i/n (i = 1..n) or sorted uniforms on (0, 1)."""
    if config.design == "fixed":
        return np.arange(1, config.n + 1, dtype=np.float64) / config.n
    return np.sort(uniform_variates(rng, config.n))


def simulate_lne_sample(
    config: SimulationConfig, replication_index: int, options: SolverOptions | None = None
) -> LNESample:
    """
    Run one replication.

    Args:
        config: Simulation protocol
        replication_index: Index keying the random stream together with the seed
        options: Solver options for the convex LSE

    Returns:
        LNESample with locally normalized and raw errors at x0 and at the anti-mode

    Raises:
        CharacterizationError: If the fit fails its optimality certificate
        ShapeCIError: If the fit or its geometry fails otherwise
    """
    truth = config.truth
    rng = replication_generator(config.seed, replication_index)
    x = design_points(config, rng)
    y = truth.value(x) + normal_variates(rng, config.n, config.sigma)
    data = RegressionData(x, y)
    fit = fit_convex_lse(data, options)
    char_rtol = (options or SolverOptions()).char_rtol
    check_lse_characterization(
        fit, data, characterization_tolerance(data, char_rtol)
    ).require_passed("convex-regression")

    piece = linear_piece_containing(fit, config.x0)
    f_hat, slope = fit.point_estimates(config.x0, piece)
    err0 = f_hat - float(truth.value(config.x0))
    err1 = slope - float(truth.first_derivative(config.x0))

    bracket = mode_bracket(fit)
    if bracket.is_degenerate:
        raise DegenerateGeometryError(f"Anti-mode bracket collapsed at {bracket.m_hat}")
    errm = bracket.m_hat - truth.mode

    width = piece.width
    return LNESample(
        index=replication_index,
        t0=math.sqrt(config.n * width) * err0,
        t1=math.sqrt(config.n * width**3) * err1,
        tm=errm / bracket.width,
        err0=err0,
        err1=err1,
        errm=errm,
        at_kink=piece.at_kink,
        iterations=int(fit.meta.get("iterations", 0)),
    )


def _replication_task(task: tuple[SimulationConfig, SolverOptions | None, int]) -> _Outcome:
    config, options, index = task
    start = time.perf_counter()
    try:
        sample = simulate_lne_sample(config, index, options)
        return _Outcome(index, sample, None, time.perf_counter() - start)
    except Exception as e:
        return _Outcome(index, None, f"{type(e).__name__}: {e}", time.perf_counter() - start)


def simulate_lne_samples(
    config: SimulationConfig,
    options: SolverOptions | None = None,
    progress_callback: ProgressCallback | None = None,
    metrics: MetricsCollector | None = None,
) -> list[LNESample]:
    """
    Run all B replications on ``config.workers`` processes.

    Returns:
        Samples ordered by replication index

    Raises:
        ReplicationError: If any replication fails (the first failing index is reported)
    """
    logger.info(
        "Simulating %d replications of n=%d (f0=%s, x0=%s, sigma=%s, workers=%d)",
        config.B,
        config.n,
        config.f0,
        config.x0,
        config.sigma,
        config.workers,
    )
    start = time.perf_counter()
    tasks = [(config, options, i) for i in range(config.B)]
    outcomes = run_ordered(_replication_task, tasks, config.workers, progress_callback)

    samples: list[LNESample] = []
    for outcome in outcomes:
        if metrics is not None:
            metrics.record_histogram("replication_seconds", outcome.seconds)
        if outcome.sample is None:
            if metrics is not None:
                metrics.increment("replication_failures")
            raise ReplicationError("Replication failed", index=outcome.index, cause=outcome.error)
        samples.append(outcome.sample)
        if metrics is not None:
            metrics.increment("replications")
            metrics.record_histogram("solver_iterations", outcome.sample.iterations)

    elapsed = time.perf_counter() - start
    logger.info(
        "Finished %d replications in %.1fs (%.1f/s)",
        len(samples),
        elapsed,
        len(samples) / elapsed if elapsed > 0 else float("inf"),
    )
    return samples


def _meta(config: SimulationConfig) -> TableMeta:
    return TableMeta(B=config.B, n=config.n, f0=config.truth.spec, seed=config.seed)


def build_pivotal_table(
    samples: Sequence[LNESample], config: SimulationConfig
) -> CriticalValueTable:
    """Signed and absolute samples of L0, L1 and M."""
    t0 = np.array([s.t0 for s in samples])
    t1 = np.array([s.t1 for s in samples])
    tm = np.array([s.tm for s in samples])
    return CriticalValueTable(
        samples={
            Statistic.L0: t0,
            Statistic.L1: t1,
            Statistic.M: tm,
            Statistic.ABS_L0: np.abs(t0),
            Statistic.ABS_L1: np.abs(t1),
            Statistic.ABS_M: np.abs(tm),
        },
        meta=_meta(config),
    )


def oracle_scalings(config: SimulationConfig) -> tuple[float, float, float]:
    """
    Factors turning raw errors into samples of the canonical oracle laws.

    Raises:
        InvalidInputError: If sigma is zero or f0'' is not positive at x0 or at the anti-mode
    """
    truth = config.truth
    curv_x0 = float(truth.second_derivative(config.x0))
    curv_m0 = float(truth.second_derivative(truth.mode))
    if config.sigma <= 0:
        raise InvalidInputError("Oracle laws need sigma > 0")
    if curv_x0 <= 0 or curv_m0 <= 0:
        raise InvalidInputError(
            f"Oracle laws need f0'' > 0 at x0 and at the anti-mode, got {curv_x0} and {curv_m0}"
        )
    ratio = config.n / config.sigma**2
    return (
        ratio**0.4 / (curv_x0 / 24.0) ** 0.2,
        ratio**0.2 / (curv_x0 / 24.0) ** 0.6,
        ratio**0.2 / (24.0 / curv_m0) ** 0.4,
    )


def build_oracle_table(
    samples: Sequence[LNESample], config: SimulationConfig
) -> CriticalValueTable:
    """Samples of H2(0), H3(0) and the mode law, signed and absolute."""
    s0, s1, sm = oracle_scalings(config)
    h2 = s0 * np.array([s.err0 for s in samples])
    h3 = s1 * np.array([s.err1 for s in samples])
    hm = sm * np.array([s.errm for s in samples])
    return CriticalValueTable(
        samples={
            Statistic.H2: h2,
            Statistic.H3: h3,
            Statistic.H2_MODE: hm,
            Statistic.ABS_H2: np.abs(h2),
            Statistic.ABS_H3: np.abs(h3),
            Statistic.ABS_H2_MODE: np.abs(hm),
        },
        meta=_meta(config),
    )


def build_full_table(samples: Sequence[LNESample], config: SimulationConfig) -> CriticalValueTable:
    """Pivotal statistics plus the oracle ones whenever the truth's curvature allows."""
    pivotal = build_pivotal_table(samples, config)
    try:
        oracle = build_oracle_table(samples, config)
    except InvalidInputError as e:
        logger.warning("Skipping oracle statistics: %s", e)
        return pivotal
    return CriticalValueTable(samples={**pivotal.samples, **oracle.samples}, meta=pivotal.meta)


def simulate_pivotal_table(
    config: SimulationConfig,
    options: SolverOptions | None = None,
    progress_callback: ProgressCallback | None = None,
) -> CriticalValueTable:
    return build_pivotal_table(simulate_lne_samples(config, options, progress_callback), config)


def simulate_oracle_table(
    config: SimulationConfig,
    options: SolverOptions | None = None,
    progress_callback: ProgressCallback | None = None,
) -> CriticalValueTable:
    oracle_scalings(config)
    return build_oracle_table(simulate_lne_samples(config, options, progress_callback), config)


def ks_distance(
    table_a: CriticalValueTable, table_b: CriticalValueTable, statistic: Statistic | str
) -> float:
    """Two-sample Kolmogorov-Smirnov distance between the stored samples of a statistic."""
    result = stats.ks_2samp(table_a.sample(statistic), table_b.sample(statistic))
    return float(result.statistic)


def ks_threshold(b_a: int, b_b: int) -> float:
    """1%-level critical distance of the two-sample KS test for sample sizes b_a, b_b."""
    return KS_CRITICAL_1PCT * math.sqrt((b_a + b_b) / (b_a * b_b))


def symmetry_band(table: CriticalValueTable, statistic: Statistic | str) -> tuple[float, float]:
    """
    Median of a signed statistic and the band 3 * IQR / sqrt(B) it should lie within
    when the law is symmetric about zero.
    """
    sample = table.sample(statistic)
    q25, q50, q75 = np.quantile(sample, [0.25, 0.5, 0.75])
    return float(q50), float(3.0 * (q75 - q25) / math.sqrt(sample.size))


def ecdf_frame(
    table: CriticalValueTable, statistics: Sequence[Statistic] | None = None
) -> pd.DataFrame:
    """Plot-ready ECDF points (statistic, value, ecdf) for every stored sample."""
    frames: list[pd.DataFrame] = []
    for stat in statistics or sorted(table.samples, key=lambda s: s.value):
        sample = table.sample(stat)
        ecdf = np.searchsorted(sample, sample, side="right") / sample.size
        frames.append(pd.DataFrame({"statistic": stat.value, "value": sample, "ecdf": ecdf}))
    if not frames:
        return pd.DataFrame(columns=["statistic", "value", "ecdf"])
    return pd.concat(frames, ignore_index=True)


def write_ecdf_csv(
    table: CriticalValueTable, path: Path, statistics: Sequence[Statistic] | None = None
) -> None:
    ecdf_frame(table, statistics).to_csv(path, index=False, float_format="%.17g")

