"""Piecewise-linear functions and the local geometry read off them.

A fitted convex regression function, the logarithm of a log-concave density and a
convex nonincreasing density are all stored as a :class:`PiecewiseLinearFunction`.
The confidence intervals only ever need a handful of facts about such a fit: its
value and one-sided slopes at a point, the maximal linear piece around a point,
and where its (anti-)mode sits relative to the neighbouring kinks.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, overload

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateGeometryError, InvalidInputError, OutOfRangeError

# Shape violations smaller than this (relative to max |slope| + 1) are solver noise.
SHAPE_RTOL = 1e-6

DEFAULT_KINK_RTOL = 1e-8

# A piece whose |slope| is below this (relative to max |slope| + 1) is flat.
DEFAULT_FLAT_RTOL = 1e-8


class Shape(str, Enum):
    """Curvature constraint of a fit."""

    CONVEX = "convex"
    CONCAVE = "concave"

    @property
    def sign(self) -> float:
        """+1 for convex, -1 for concave."""
        return 1.0 if self is Shape.CONVEX else -1.0


class Side(str, Enum):
    """Side of a one-sided derivative."""

    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class LinearPiece:
    """Maximal interval [u_hat, v_hat] on which a fit is affine.

    Attributes:
        u_hat: Left endpoint (a kink or the leftmost knot)
        v_hat: Right endpoint (a kink or the rightmost knot)
        slope: Slope of the fit on the piece
        intercept: Intercept so that the fit equals ``intercept + slope * x`` on the piece
        at_kink: True when the piece was chosen by the tie rule because x0 is a kink
    """

    u_hat: float
    v_hat: float
    slope: float
    intercept: float
    at_kink: bool = False

    def __post_init__(self) -> None:
        if not self.u_hat < self.v_hat:
            raise DegenerateGeometryError(
                f"Linear piece needs u_hat < v_hat, got [{self.u_hat}, {self.v_hat}]"
            )

    @property
    def width(self) -> float:
        return self.v_hat - self.u_hat

    def contains(self, x: float) -> bool:
        return self.u_hat <= x <= self.v_hat

    def value_at(self, x: float) -> float:
        return self.intercept + self.slope * x

    def to_dict(self) -> dict[str, float]:
        return {"u": self.u_hat, "v": self.v_hat}


@dataclass(frozen=True)
class ModeBracket:
    """Anti-mode (or mode) location with the nearest kinks on either side.

    When no kink exists strictly to one side of ``m_hat``, that side collapses
    to ``m_hat`` itself.
    """

    m_hat: float
    u_m: float
    v_m: float

    def __post_init__(self) -> None:
        if not self.u_m <= self.m_hat <= self.v_m:
            raise InvalidInputError(
                f"Mode bracket must satisfy u_m <= m_hat <= v_m, got "
                f"({self.u_m}, {self.m_hat}, {self.v_m})"
            )

    @property
    def width(self) -> float:
        return self.v_m - self.u_m

    @property
    def is_degenerate(self) -> bool:
        return self.width == 0.0

    def to_dict(self) -> dict[str, float]:
        return {"u": self.u_m, "v": self.v_m}


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFunction:
    """Knots and ordinates of a continuous piecewise-linear function.

    Evaluation is linear interpolation between bracketing knots; the function is
    undefined outside ``[knots[0], knots[-1]]``. Knots that are not kinks may be
    stored (the convex LSE keeps every design point); :func:`kinks` filters them.
    """

    knots: NDArray[np.float64]
    values: NDArray[np.float64]
    shape: Shape = Shape.CONVEX
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        knots = np.array(self.knots, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)

        if knots.ndim != 1 or values.ndim != 1:
            raise InvalidInputError("knots and values must be one-dimensional")
        if knots.size != values.size:
            raise InvalidInputError(
                f"knots and values differ in length ({knots.size} vs {values.size})"
            )
        if knots.size < 2:
            raise InvalidInputError("A piecewise-linear function needs at least 2 knots")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise InvalidInputError("knots and values must be finite")
        if np.any(np.diff(knots) <= 0):
            raise InvalidInputError("knots must be strictly increasing")

        shape = Shape(self.shape)
        slopes = np.diff(values) / np.diff(knots)
        if slopes.size > 1:
            worst = float(np.max(-shape.sign * np.diff(slopes)))
            if worst > SHAPE_RTOL * (float(np.max(np.abs(slopes))) + 1.0):
                raise InvalidInputError(
                    f"Slopes violate the {shape.value} shape constraint by {worst:.3e}"
                )

        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "meta", dict(self.meta))

    @cached_property
    def slopes(self) -> NDArray[np.float64]:
        """Slope of each segment between consecutive knots."""
        slopes = np.diff(self.values) / np.diff(self.knots)
        slopes.setflags(write=False)
        return slopes

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def kink_tolerance(self, rtol: float = DEFAULT_KINK_RTOL) -> float:
        """Absolute slope-change threshold: rtol * (max |slope| + 1)."""
        return rtol * (float(np.max(np.abs(self.slopes))) + 1.0)

    def integral(self) -> float:
        """Exact integral over the knot range."""
        widths = np.diff(self.knots)
        return float(np.sum(widths * (self.values[:-1] + self.values[1:]) / 2.0))

    def point_estimates(self, x0: float, piece: LinearPiece) -> tuple[float, float]:
        """Fitted value at x0 and the slope of the covering piece."""
        return evaluate(self, x0), piece.slope

    def __call__(self, t: ArrayLike) -> Any:
        return evaluate(self, t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "shape": self.shape.value,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PiecewiseLinearFunction:
        try:
            return cls(
                knots=np.asarray(data["knots"], dtype=np.float64),
                values=np.asarray(data["values"], dtype=np.float64),
                shape=Shape(data.get("shape", Shape.CONVEX.value)),
                meta=data.get("meta", {}),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidInputError):
                raise
            raise InvalidInputError(f"Malformed piecewise-linear function: {e}") from e


@overload
def evaluate(f: PiecewiseLinearFunction, t: float) -> float: ...


@overload
def evaluate(f: PiecewiseLinearFunction, t: NDArray[np.float64]) -> NDArray[np.float64]: ...


def evaluate(f: PiecewiseLinearFunction, t: Any) -> Any:
    """
    Evaluate f by linear interpolation between bracketing knots.

    Args:
        f: Piecewise-linear function
        t: Scalar or array of evaluation points

    Returns:
        Value(s) of f at t; a knot returns its stored ordinate exactly

    Raises:
        OutOfRangeError: If any point lies outside the knot range
    """
    points = np.asarray(t, dtype=np.float64)
    lo, hi = f.domain
    if np.any(~np.isfinite(points)) or np.any(points < lo) or np.any(points > hi):
        raise OutOfRangeError(f"Evaluation point outside knot range [{lo}, {hi}]")
    result = np.interp(points, f.knots, f.values)
    if points.ndim == 0:
        return float(result)
    return result


def one_sided_derivative(f: PiecewiseLinearFunction, t: float, side: Side | str) -> float:
    """
    Slope of the segment adjacent to t on the requested side.

    Raises:
        OutOfRangeError: If t is outside the knot range, or the side does not exist
            (left of the leftmost knot, right of the rightmost knot)
    """
    side = Side(side)
    lo, hi = f.domain
    if not lo <= t <= hi:
        raise OutOfRangeError(f"t={t} outside knot range [{lo}, {hi}]")
    if side is Side.LEFT:
        if t == lo:
            raise OutOfRangeError("Left derivative is undefined at the leftmost knot")
        idx = int(np.searchsorted(f.knots, t, side="left")) - 1
    else:
        if t == hi:
            raise OutOfRangeError("Right derivative is undefined at the rightmost knot")
        idx = int(np.searchsorted(f.knots, t, side="right")) - 1
    return float(f.slopes[idx])


def kinks(f: PiecewiseLinearFunction, tau_kink: float | None = None) -> NDArray[np.float64]:
    """
    Ordered kink locations, boundary knots included.

    Args:
        f: Piecewise-linear function
        tau_kink: Absolute slope-change threshold; defaults to
            ``1e-8 * (max |slope| + 1)``

    Returns:
        Knots where |slope change| > tau_kink, plus both boundary knots
    """
    tol = f.kink_tolerance() if tau_kink is None else tau_kink
    changes = np.abs(np.diff(f.slopes))
    interior = f.knots[1:-1][changes > tol]
    return np.concatenate(([f.knots[0]], interior, [f.knots[-1]]))


def linear_piece_containing(
    f: PiecewiseLinearFunction, x0: float, tau_kink: float | None = None
) -> LinearPiece:
    """
    Maximal linear piece [u_hat, v_hat] of f containing x0.

    When x0 is itself a kink, the longer adjacent piece is returned, the right one
    on an exact tie, and the piece is flagged ``at_kink``.

    Raises:
        OutOfRangeError: If x0 is not strictly inside the knot range
    """
    lo, hi = f.domain
    if not lo < x0 < hi:
        raise OutOfRangeError(f"x0={x0} must lie strictly inside the knot range [{lo}, {hi}]")

    kink_set = kinks(f, tau_kink)
    j = int(np.searchsorted(kink_set, x0, side="left"))
    at_kink = bool(kink_set[j] == x0)
    if at_kink:
        left = (kink_set[j - 1], kink_set[j])
        right = (kink_set[j], kink_set[j + 1])
        u, v = left if (left[1] - left[0]) > (right[1] - right[0]) else right
    else:
        u, v = kink_set[j - 1], kink_set[j]

    fu, fv = evaluate(f, float(u)), evaluate(f, float(v))
    slope = (fv - fu) / (v - u)
    return LinearPiece(
        u_hat=float(u),
        v_hat=float(v),
        slope=float(slope),
        intercept=float(fu - slope * u),
        at_kink=at_kink,
    )


def anti_mode(f: PiecewiseLinearFunction, tau_flat: float | None = None) -> float:
    """
    Smallest minimizer of a convex fit, or smallest maximizer of a concave one.

    For a flat extremal piece the left endpoint is returned.

    Args:
        f: Convex or concave fit
        tau_flat: Absolute slope below which a piece counts as flat; defaults to
            DEFAULT_FLAT_RTOL * (max |slope| + 1). This bounds slopes, not slope
            changes, so it is separate from the kink threshold.
    """
    tol = f.kink_tolerance(DEFAULT_FLAT_RTOL) if tau_flat is None else tau_flat
    signed = f.shape.sign * f.values
    idx = int(np.argmin(signed))
    while idx > 0 and abs(f.slopes[idx - 1]) <= tol:
        idx -= 1
    return float(f.knots[idx])


def mode_bracket(
    f: PiecewiseLinearFunction, tau_kink: float | None = None, tau_flat: float | None = None
) -> ModeBracket:
    """Anti-mode (mode) plus the first kinks strictly to its left and right."""
    m_hat = anti_mode(f, tau_flat)
    kink_set = kinks(f, tau_kink)
    left = kink_set[kink_set < m_hat]
    right = kink_set[kink_set > m_hat]
    return ModeBracket(
        m_hat=m_hat,
        u_m=float(left[-1]) if left.size else m_hat,
        v_m=float(right[0]) if right.size else m_hat,
    )
