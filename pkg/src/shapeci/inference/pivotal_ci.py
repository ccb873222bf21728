"""Locally normalized error (LNE) confidence intervals.

Every interval is centred at the point estimate and scaled by the length of the
fitted linear piece around x0 (or of the kink bracket around the mode):

    value:       f_hat(x0)  +/- a_hat * c(|L0|) / sqrt(n (v - u))
    derivative:  f_hat'(x0) +/- a_hat * c(|L1|) / sqrt(n (v - u)^3)
    mode:        m_hat      +/- c(|M|) * (v_m - u_m)

``a_hat`` is a consistent estimate of the white-noise scale of the model: the
noise level for fixed-design regression, sqrt(f_hat(x0)) for densities, and so
on. The mode interval needs no scale at all.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Protocol

import numpy as np
from numpy.typing import ArrayLike

from ..config.validation import validate_delta
from ..core.data import RegressionData
from ..core.errors import (
    DegenerateGeometryError,
    InvalidInputError,
    MissingNuisanceError,
    OutOfRangeError,
)
from ..core.piecewise import LinearPiece, ModeBracket, PiecewiseLinearFunction, evaluate
from ..estimators.log_concave import LogConcaveFit
from .tables import CriticalValueTable, Statistic

logger = logging.getLogger(__name__)

Domain = tuple[float, float]
NONNEGATIVE: Domain = (0.0, math.inf)


class Target(str, Enum):
    """Quantity a confidence interval is built for."""

    VALUE = "value"
    DERIVATIVE = "derivative"
    MODE = "mode"


class PointEstimator(Protocol):
    def point_estimates(self, x0: float, piece: LinearPiece) -> tuple[float, float]: ...


@dataclass(frozen=True)
class NuisanceScale:
    """Estimate of the white-noise scale a, with a note on where it came from."""

    a_hat: float
    source: str = "user"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a_hat) and self.a_hat >= 0):
            raise InvalidInputError(f"Nuisance scale must be finite and >= 0, got {self.a_hat}")


@dataclass(frozen=True)
class ConfidenceInterval:
    """A two-sided LNE confidence interval.

    Attributes:
        lower: Lower endpoint (after clamping)
        upper: Upper endpoint (after clamping)
        level: Nominal coverage 1 - delta
        target: Value, derivative or mode
        estimate: Point estimate the interval is centred at
        clamped: True when intersecting with the domain moved an endpoint
        x0: Evaluation point (None for the mode)
        piece: Linear piece used for value and derivative intervals
        bracket: Kink bracket used for mode intervals
        at_kink: True when x0 is a kink and the piece came from the tie rule
    """

    lower: float
    upper: float
    level: float
    target: Target
    estimate: float
    clamped: bool = False
    x0: float | None = None
    piece: LinearPiece | None = None
    bracket: ModeBracket | None = None
    at_kink: bool = False

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return (self.lower + self.upper) / 2.0

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def covers(self, other: ConfidenceInterval) -> bool:
        """True when ``other`` lies inside this interval."""
        return self.lower <= other.lower and other.upper <= self.upper

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"target": self.target.value}
        if self.x0 is not None:
            payload["x0"] = self.x0
        payload.update(
            {
                "estimate": self.estimate,
                "lower": self.lower,
                "upper": self.upper,
                "level": self.level,
                "clamped": self.clamped,
            }
        )
        if self.piece is not None:
            payload["piece"] = self.piece.to_dict()
            payload["at_kink"] = self.at_kink
        if self.bracket is not None:
            payload["bracket"] = self.bracket.to_dict()
        return payload


def _critical_value(table: CriticalValueTable, statistic: Statistic, delta: float) -> float:
    try:
        validate_delta(delta)
    except ValueError as e:
        raise InvalidInputError(str(e)) from e
    return table.quantile(statistic, delta)


def _interval(
    estimate: float,
    half_width: float,
    delta: float,
    target: Target,
    domain: Domain | None,
    **context: Any,
) -> ConfidenceInterval:
    lower = estimate - half_width
    upper = estimate + half_width
    clamped = False
    if domain is not None:
        lo, hi = domain
        new_lower, new_upper = max(lower, lo), min(upper, hi)
        clamped = new_lower != lower or new_upper != upper
        if clamped:
            logger.debug(
                "%s interval [%.6g, %.6g] clamped to [%.6g, %.6g]",
                target.value,
                lower,
                upper,
                new_lower,
                new_upper,
            )
        lower, upper = new_lower, new_upper
    return ConfidenceInterval(
        lower=lower,
        upper=upper,
        level=1.0 - delta,
        target=target,
        estimate=estimate,
        clamped=clamped,
        **context,
    )


def _require_inside(piece: LinearPiece, x0: float) -> None:
    if not piece.contains(x0):
        raise OutOfRangeError(
            f"x0={x0} lies outside the linear piece [{piece.u_hat}, {piece.v_hat}]"
        )


def _value_interval(
    value: float,
    piece: LinearPiece,
    x0: float,
    n: int,
    scale: NuisanceScale,
    delta: float,
    table: CriticalValueTable,
    domain: Domain | None,
) -> ConfidenceInterval:
    c = _critical_value(table, Statistic.ABS_L0, delta)
    half = scale.a_hat * c / math.sqrt(n * piece.width)
    return _interval(
        value, half, delta, Target.VALUE, domain, x0=x0, piece=piece, at_kink=piece.at_kink
    )


def _derivative_interval(
    slope: float,
    piece: LinearPiece,
    x0: float,
    n: int,
    scale: NuisanceScale,
    delta: float,
    table: CriticalValueTable,
    domain: Domain | None,
) -> ConfidenceInterval:
    c = _critical_value(table, Statistic.ABS_L1, delta)
    half = scale.a_hat * c / math.sqrt(n * piece.width**3)
    return _interval(
        slope, half, delta, Target.DERIVATIVE, domain, x0=x0, piece=piece, at_kink=piece.at_kink
    )


def ci_value(
    fit: PointEstimator,
    piece: LinearPiece,
    x0: float,
    n: int,
    scale: NuisanceScale,
    delta: float,
    table: CriticalValueTable,
    domain: Domain | None = None,
) -> ConfidenceInterval:
    """
    Confidence interval for the function value at x0.

    Args:
        fit: Fitted estimate (convex LSE, convex-density LSE or LogConcaveFit)
        piece: Maximal linear piece of the fit containing x0
        x0: Evaluation point
        n: Sample size
        scale: White-noise scale estimate
        delta: 1 - nominal level
        table: Critical-value table providing absL0
        domain: Optional range to intersect with, e.g. [0, inf) for densities

    Raises:
        OutOfRangeError: If x0 is not inside the piece
        MissingStatisticError: If the table lacks absL0 at delta
    """
    _require_inside(piece, x0)
    value, _ = fit.point_estimates(x0, piece)
    return _value_interval(value, piece, x0, n, scale, delta, table, domain)


def ci_derivative(
    fit: PointEstimator,
    piece: LinearPiece,
    x0: float,
    n: int,
    scale: NuisanceScale,
    delta: float,
    table: CriticalValueTable,
    domain: Domain | None = None,
) -> ConfidenceInterval:
    """Confidence interval for the derivative at x0 (cube-power normalizer, absL1)."""
    _require_inside(piece, x0)
    _, slope = fit.point_estimates(x0, piece)
    return _derivative_interval(slope, piece, x0, n, scale, delta, table, domain)


def ci_mode(
    bracket: ModeBracket,
    delta: float,
    table: CriticalValueTable,
    domain: Domain | None = None,
) -> ConfidenceInterval:
    """
    Scale-free confidence interval for the anti-mode (or mode).

    Args:
        bracket: Mode estimate with its nearest kinks
        delta: 1 - nominal level
        table: Critical-value table providing absM
        domain: Optional range to intersect with, e.g. the design range

    Raises:
        DegenerateGeometryError: If the bracket has zero width
    """
    if bracket.is_degenerate:
        raise DegenerateGeometryError(
            f"Mode bracket collapsed to the single point {bracket.m_hat}; "
            "the fit has no kink on either side of its mode"
        )
    c = _critical_value(table, Statistic.ABS_M, delta)
    return _interval(
        bracket.m_hat, c * bracket.width, delta, Target.MODE, domain, bracket=bracket
    )


def ci_generic(
    point_estimates: tuple[float, float],
    piece: LinearPiece,
    x0: float,
    n: int,
    scale: NuisanceScale,
    delta: float,
    table: CriticalValueTable,
    domain: Domain | None = None,
) -> tuple[ConfidenceInterval, ConfidenceInterval]:
    """
    Value and derivative intervals from externally computed geometry.

    Serves fits produced outside this package (s-concave, hazard, deconvolution):
    the caller supplies the point estimates, the linear piece and the model's
    scale estimate. The arithmetic is shared with :func:`ci_value` and
    :func:`ci_derivative`, so the model-specific intervals are reproduced exactly.
    ``domain`` applies to the value interval only.

    Returns:
        Tuple of (value interval, derivative interval)
    """
    _require_inside(piece, x0)
    value, slope = point_estimates
    return (
        _value_interval(value, piece, x0, n, scale, delta, table, domain),
        _derivative_interval(slope, piece, x0, n, scale, delta, table, None),
    )


def estimate_sigma(data: RegressionData) -> float:
    """
    First-difference estimate of the noise standard deviation.

    sigma_hat^2 = sum_i (Y_{i+1} - Y_i)^2 / (2 (n - 1)).
    """
    diffs = np.diff(data.y)
    return math.sqrt(float(diffs @ diffs) / (2.0 * (data.n - 1)))


def local_design_density(x: ArrayLike, piece: LinearPiece) -> float:
    """#{i: u <= X_i <= v} / (n (v - u)), the design density seen by the piece."""
    design = np.sort(np.asarray(x, dtype=np.float64))
    count = int(
        np.searchsorted(design, piece.v_hat, side="right")
        - np.searchsorted(design, piece.u_hat, side="left")
    )
    return count / (design.size * piece.width)


def nuisance_a_random_design(
    data: RegressionData, piece: LinearPiece, sigma_hat: float
) -> NuisanceScale:
    """
    Scale sigma_hat / sqrt(pi_hat(x0)) for regression on a random design.

    Raises:
        MissingNuisanceError: If no design point falls inside the piece
    """
    density = local_design_density(data.x, piece)
    if density == 0:
        raise MissingNuisanceError(
            f"No design points inside [{piece.u_hat}, {piece.v_hat}]; the local design "
            "density is unavailable, use the fixed-design scale sigma_hat instead"
        )
    return NuisanceScale(a_hat=sigma_hat / math.sqrt(density), source="random-design")


def nuisance_logconcave(fit: LogConcaveFit, x0: float) -> NuisanceScale:
    """sqrt(f_hat(x0)) for the log-concave MLE."""
    lo, hi = fit.support
    if not lo <= x0 <= hi:
        raise OutOfRangeError(f"x0={x0} lies outside the support [{lo}, {hi}] (density is 0)")
    return NuisanceScale(a_hat=math.sqrt(fit.density(x0)), source="log-concave")


def nuisance_density(fit: PiecewiseLinearFunction, x0: float) -> NuisanceScale:
    """sqrt(f_hat(x0)) for the convex-density LSE."""
    return NuisanceScale(a_hat=math.sqrt(max(evaluate(fit, x0), 0.0)), source="convex-density")


def nuisance_hazard(hazard_value: float, ecdf_value: float) -> NuisanceScale:
    """sqrt(h_hat(x0) / (1 - F_n(x0))) for a monotone hazard estimate."""
    if not 0.0 <= ecdf_value < 1.0:
        raise InvalidInputError(f"Empirical CDF value must lie in [0, 1), got {ecdf_value}")
    if hazard_value < 0:
        raise InvalidInputError(f"Hazard estimate must be >= 0, got {hazard_value}")
    return NuisanceScale(a_hat=math.sqrt(hazard_value / (1.0 - ecdf_value)), source="hazard")


def nuisance_deconvolution(density_value: float, kernel_at_zero: float) -> NuisanceScale:
    """sqrt(g_hat(x0)) / k(0) for the deconvolution LSE."""
    if density_value < 0:
        raise InvalidInputError(f"Observed-density estimate must be >= 0, got {density_value}")
    if not kernel_at_zero > 0:
        raise InvalidInputError(f"Kernel value k(0) must be > 0, got {kernel_at_zero}")
    return NuisanceScale(a_hat=math.sqrt(density_value) / kernel_at_zero, source="deconvolution")
