"""Convex least-squares regression by support reduction.

The fit minimizes sum_i (Y_i - f(X_i))^2 over convex f. Its values at the design
points are unique; between design points the fit is the linear interpolant, so it
is stored with knots equal to the design and kinks at a subset of it.

The solver works in the hat basis of the current kink set (values at the kinks),
where the restricted least-squares problem has a tridiagonal normal matrix. It
alternates between adding the design point with the largest directional
derivative of the hinge ``(x - x_j)_+`` and solving the restricted problem, with a
support-reduction step back to feasibility whenever a slope change turns negative.
The stopping rule is exactly the characterization of the LSE, so a converged fit
carries its own optimality certificate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solveh_banded

from ..config import ShapeCISettings
from ..core.data import RegressionData
from ..core.errors import CharacterizationError, ConvergenceError, InvalidInputError
from ..core.piecewise import (
    DEFAULT_KINK_RTOL,
    PiecewiseLinearFunction,
    Shape,
    kinks,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and limits shared by the shape-constrained solvers.

    Attributes:
        max_iterations: Outer iterations (knot additions) before giving up
        char_rtol: Characterization tolerance relative to the data scale
        kink_rtol: Relative slope change that makes a knot a kink
        grad_tol: Gradient sup-norm, per unit of total weight, at which Newton stops
        max_newton_steps: Newton steps per restricted problem
    """

    max_iterations: int = 10_000
    char_rtol: float = 1e-10
    kink_rtol: float = DEFAULT_KINK_RTOL
    grad_tol: float = 1e-11
    max_newton_steps: int = 200

    @classmethod
    def from_settings(cls, settings: ShapeCISettings) -> SolverOptions:
        return cls(
            max_iterations=settings.max_iterations,
            char_rtol=settings.char_rtol,
            kink_rtol=settings.kink_rtol,
            grad_tol=settings.grad_tol,
        )


@dataclass(frozen=True)
class CharacterizationReport:
    """Optimality certificate of a shape-constrained fit.

    Attributes:
        min_gap: Minimum of the majorization gap over the evaluation grid (>= -tol)
        max_kink_gap: Maximum |gap| over kinks (<= tol)
        boundary_gap: Residual of the equality conditions at the right boundary
        tolerance: Tolerance the gaps were compared against
        passed: Whether every condition holds
    """

    min_gap: float
    max_kink_gap: float
    boundary_gap: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict[str, float | bool]:
        return {
            "min_gap": self.min_gap,
            "max_kink_gap": self.max_kink_gap,
            "boundary_gap": self.boundary_gap,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }

    def require_passed(self, model: str) -> None:
        """
        Raise unless every condition of the certificate holds.

        Raises:
            CharacterizationError: With the report as details
        """
        if not self.passed:
            raise CharacterizationError(
                f"{model} fit failed its characterization check "
                f"(min_gap={self.min_gap:.3e}, max_kink_gap={self.max_kink_gap:.3e}, "
                f"boundary_gap={self.boundary_gap:.3e}, tolerance={self.tolerance:.3e})",
                report=self.to_dict(),
            )


def characterization_tolerance(data: RegressionData, char_rtol: float) -> float:
    """tau_char = char_rtol * scale(y), expressed in units of the integrated processes."""
    return char_rtol * max(data.y_scale, np.finfo(np.float64).tiny) * data.span


def _restricted_fit(
    x: NDArray[np.float64], y: NDArray[np.float64], knot_idx: NDArray[np.intp]
) -> NDArray[np.float64]:
    """Least-squares fit among piecewise-linear functions with breaks at x[knot_idx]."""
    knot_x = x[knot_idx]
    k = knot_idx.size
    seg = np.clip(np.searchsorted(knot_x, x, side="right") - 1, 0, k - 2)
    lam = (x - knot_x[seg]) / (knot_x[seg + 1] - knot_x[seg])
    left_w = 1.0 - lam

    diag = np.bincount(seg, weights=left_w**2, minlength=k) + np.bincount(
        seg + 1, weights=lam**2, minlength=k
    )
    off = np.bincount(seg, weights=left_w * lam, minlength=k - 1)[: k - 1]
    rhs = np.bincount(seg, weights=left_w * y, minlength=k) + np.bincount(
        seg + 1, weights=lam * y, minlength=k
    )

    banded = np.zeros((2, k))
    banded[0, 1:] = off
    banded[1, :] = diag
    coef = solveh_banded(banded, rhs)
    return left_w * coef[seg] + lam * coef[seg + 1]


def _slope_changes(
    x: NDArray[np.float64], theta: NDArray[np.float64], knot_idx: NDArray[np.intp]
) -> NDArray[np.float64]:
    """Slope change at each interior knot of the interpolant of theta on knot_idx."""
    slopes = np.diff(theta[knot_idx]) / np.diff(x[knot_idx])
    return np.diff(slopes)


def _hinge_derivatives(x: NDArray[np.float64], r: NDArray[np.float64]) -> NDArray[np.float64]:
    """(1/n) sum_i r_i (x_i - x_j)_+ for every design point x_j."""
    tail_r = np.cumsum(r[::-1])[::-1]
    tail_rx = np.cumsum((r * x)[::-1])[::-1]
    return (tail_rx - x * tail_r) / x.size


def fit_convex_lse(
    data: RegressionData, options: SolverOptions | None = None
) -> PiecewiseLinearFunction:
    """
    Fit the convex least-squares estimator.

    Args:
        data: Validated regression data
        options: Solver options (defaults when omitted)

    Returns:
        Convex piecewise-linear fit with knots at every design point; ``meta``
        records iterations, the final directional-derivative residual and the RSS

    Raises:
        ConvergenceError: If the characterization is not met within max_iterations
    """
    opts = options or SolverOptions()
    x, y = data.x, data.y
    n = data.n

    if n == 2:
        return PiecewiseLinearFunction(
            knots=x,
            values=y,
            shape=Shape.CONVEX,
            meta={"iterations": 0, "residual": 0.0, "rss": 0.0},
        )

    tol = characterization_tolerance(data, opts.char_rtol)
    knot_idx = np.array([0, n - 1], dtype=np.intp)
    theta = _restricted_fit(x, y, knot_idx)
    residual = np.inf
    iterations = 0

    while True:
        derivs = _hinge_derivatives(x, y - theta)
        derivs[knot_idx] = -np.inf
        j_star = int(np.argmax(derivs))
        residual = float(derivs[j_star])
        if residual <= tol:
            break
        if iterations >= opts.max_iterations:
            raise ConvergenceError(
                "Convex LSE support reduction did not converge",
                iterations=iterations,
                residual=residual,
            )
        iterations += 1

        candidate = np.sort(np.append(knot_idx, j_star))
        feasible = theta
        while True:
            proposal = _restricted_fit(x, y, candidate)
            beta_new = _slope_changes(x, proposal, candidate)
            slope_scale = float(np.max(np.abs(np.diff(proposal) / np.diff(x)))) + 1.0
            eps = 1e-14 * slope_scale
            negative = beta_new < -eps
            if not np.any(negative):
                theta, knot_idx = proposal, candidate
                break

            # Step from the feasible point toward the proposal until a slope change hits zero.
            beta_old = _slope_changes(x, feasible, candidate)
            ratios = beta_old[negative] / (beta_old[negative] - beta_new[negative])
            step = float(np.min(ratios))
            feasible = feasible + step * (proposal - feasible)
            beta_mid = _slope_changes(x, feasible, candidate)
            drop = beta_mid <= eps
            drop[np.flatnonzero(negative)[np.argmin(ratios)]] = True
            keep = np.concatenate(([True], ~drop, [True]))
            candidate = candidate[keep]

        logger.debug(
            "convex LSE iteration %d: added x=%.6g, %d knots, residual %.3e",
            iterations,
            x[j_star],
            knot_idx.size,
            residual,
        )

    rss = float(np.sum((y - theta) ** 2))
    logger.debug("convex LSE converged after %d iterations (rss=%.6g)", iterations, rss)
    return PiecewiseLinearFunction(
        knots=x,
        values=theta,
        shape=Shape.CONVEX,
        meta={"iterations": iterations, "residual": max(residual, 0.0), "rss": rss},
    )


def lse_process_gap(
    fit: PiecewiseLinearFunction, data: RegressionData, t: NDArray[np.float64]
) -> NDArray[np.float64]:
    """
    H_n(t; f) - Y_n(t) where both processes integrate from the left end of the design.

    H_n(t; f) = (1/n) sum_i f(X_i) (t - X_i)_+ and Y_n(t) = (1/n) sum_i Y_i (t - X_i)_+.
    """
    r = data.y - np.interp(data.x, fit.knots, fit.values)
    pos = np.searchsorted(data.x, t, side="right")
    head_r = np.concatenate(([0.0], np.cumsum(r)))[pos]
    head_rx = np.concatenate(([0.0], np.cumsum(r * data.x)))[pos]
    return -(t * head_r - head_rx) / data.n


def check_lse_characterization(
    fit: PiecewiseLinearFunction,
    data: RegressionData,
    tau_char: float | None = None,
    tau_kink: float | None = None,
) -> CharacterizationReport:
    """
    Check the majorization characterization of the convex LSE.

    H_n(.; f) must majorize Y_n on the design grid, touch it at every kink, and the
    two processes (and their derivatives) must agree at the right boundary.

    Args:
        fit: Candidate convex fit defined on the design range
        data: Regression data the fit claims to solve
        tau_char: Absolute tolerance (defaults to 1e-10 * scale(y) * span(x))
        tau_kink: Kink threshold passed to :func:`kinks`

    Raises:
        InvalidInputError: If the fit's knot range does not match the design range
    """
    if fit.knots[0] != data.x[0] or fit.knots[-1] != data.x[-1]:
        raise InvalidInputError(
            "Mismatched grids: the fit must span exactly the design range "
            f"[{data.x[0]}, {data.x[-1]}], got [{fit.knots[0]}, {fit.knots[-1]}]"
        )
    tol = tau_char
    if tol is None:
        tol = characterization_tolerance(data, SolverOptions().char_rtol)

    kink_set = kinks(fit, tau_kink)
    grid = np.union1d(data.x, kink_set)
    gap = lse_process_gap(fit, data, grid)
    kink_gap = lse_process_gap(fit, data, kink_set)

    r = data.y - np.interp(data.x, fit.knots, fit.values)
    boundary = abs(float(np.mean(r))) * data.span

    min_gap = float(np.min(gap))
    max_kink_gap = float(np.max(np.abs(kink_gap)))
    passed = min_gap >= -tol and max_kink_gap <= tol and boundary <= tol
    return CharacterizationReport(
        min_gap=min_gap,
        max_kink_gap=max_kink_gap,
        boundary_gap=boundary,
        tolerance=tol,
        passed=passed,
    )
