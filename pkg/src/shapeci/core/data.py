"""Validated containers for regression pairs and i.i.d. samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError


def _as_vector(name: str, values: ArrayLike) -> NDArray[np.float64]:
    try:
        array = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{name} must be numeric: {e}") from e
    if array.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return array


@dataclass(frozen=True, eq=False)
class RegressionData:
    """Design points and responses of a univariate regression.

    Attributes:
        x: Strictly increasing design points
        y: Responses, same length as x
    """

    x: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self) -> None:
        x = _as_vector("x", self.x)
        y = _as_vector("y", self.y)
        if x.size != y.size:
            raise InvalidInputError(f"x and y differ in length ({x.size} vs {y.size})")
        if x.size < 2:
            raise InvalidInputError(f"Regression needs n >= 2 observations, got {x.size}")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError(
                "Design points must be strictly increasing (duplicates are rejected)"
            )
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def y_scale(self) -> float:
        """Magnitude of the responses used to scale solver tolerances."""
        return float(np.max(np.abs(self.y)))

    @property
    def span(self) -> float:
        return float(self.x[-1] - self.x[0])


@dataclass(frozen=True, eq=False)
class SampleData:
    """Sorted i.i.d. observations for the density models."""

    obs: NDArray[np.float64]

    def __post_init__(self) -> None:
        obs = np.sort(_as_vector("obs", self.obs))
        if obs.size < 2:
            raise InvalidInputError(f"Density estimation needs n >= 2 observations, got {obs.size}")
        obs.setflags(write=False)
        object.__setattr__(self, "obs", obs)

    @property
    def n(self) -> int:
        return int(self.obs.size)

    def collapse_ties(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """
        Distinct observations and their empirical weights (multiplicity / n).

        Returns:
            Tuple of (unique sorted values, weights summing to one)
        """
        values, counts = np.unique(self.obs, return_counts=True)
        return values, counts / self.n

    def require_nonnegative(self) -> None:
        if self.obs[0] < 0:
            raise InvalidInputError(
                f"Convex nonincreasing density model needs obs >= 0, found {self.obs[0]}"
            )


def integrated_ecdf(
    values: NDArray[np.float64], weights: NDArray[np.float64], t: ArrayLike
) -> NDArray[np.float64]:
    """
    Integrated empirical distribution function sum_i w_i (t - v_i)_+.

    Args:
        values: Sorted support points of the empirical measure
        weights: Their masses
        t: Evaluation points

    Returns:
        Array of integrated-ECDF values at t
    """
    points = np.atleast_1d(np.asarray(t, dtype=np.float64))
    pos = np.searchsorted(values, points, side="right")
    head_w = np.concatenate(([0.0], np.cumsum(weights)))[pos]
    head_wv = np.concatenate(([0.0], np.cumsum(weights * values)))[pos]
    return points * head_w - head_wv
