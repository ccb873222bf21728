"""Least-squares estimator of a convex nonincreasing density on [0, inf).

The estimator minimizes

    1/2 int f^2 - (1/n) sum_i f(X_i)

over convex nonincreasing f >= 0. Such an f is a mixture of triangles
``(theta - x)_+``, so the problem is a nonnegative quadratic program in the mixing
weights:

    Phi(w) = 1/2 w' G w - c' w,   G_kl = int (theta_k - x)_+ (theta_l - x)_+ dx,
                                  c_k  = (1/n) sum_i (theta_k - X_i)_+.

Support reduction adds the atom theta with the most negative directional
derivative ``H(theta) - Y(theta)`` (integrated fitted CDF minus integrated
empirical CDF), re-solves the restricted problem and steps back to feasibility
when a weight turns negative. Between consecutive observations the directional
derivative is convex in theta, so its minimum on each gap is found exactly.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, lstsq, solve
from scipy.optimize import brentq

from ..core.data import SampleData, integrated_ecdf
from ..core.errors import ConvergenceError, InvalidInputError
from ..core.piecewise import PiecewiseLinearFunction, Shape, kinks
from .convex_lse import CharacterizationReport, SolverOptions
from .log_concave import DENSITY_CHAR_RTOL

logger = logging.getLogger(__name__)

# Candidate atoms are searched up to this multiple of the largest observation.
SUPPORT_SEARCH_FACTOR = 2.0
_BISECTION_STEPS = 64
_POLISH_ROUNDS = 8
_BRENT_RTOL = 4.0 * float(np.finfo(np.float64).eps)

# Tolerance on |int f - 1| the solver drives the mixture to.
MASS_TOL = 0.1 * DENSITY_CHAR_RTOL


def _triangle_gram(s: NDArray[np.float64], t: NDArray[np.float64]) -> NDArray[np.float64]:
    """int_0^inf (s - x)_+ (t - x)_+ dx for broadcastable s, t >= 0."""
    a = np.minimum(s, t)
    b = np.maximum(s, t)
    return a * a * b / 2.0 - a**3 / 6.0


def _mixture_cdf(
    atoms: NDArray[np.float64], weights: NDArray[np.float64], t: NDArray[np.float64]
) -> NDArray[np.float64]:
    """int_0^t f for f = sum_k w_k (theta_k - x)_+."""
    m = np.minimum(t[:, None], atoms[None, :])
    return (m * atoms[None, :] - m * m / 2.0) @ weights


def _directional_derivative(
    atoms: NDArray[np.float64],
    weights: NDArray[np.float64],
    u: NDArray[np.float64],
    w: NDArray[np.float64],
    t: NDArray[np.float64],
) -> NDArray[np.float64]:
    fitted = _triangle_gram(t[:, None], atoms[None, :]) @ weights
    return fitted - integrated_ecdf(u, w, t)


def _restricted_weights(
    atoms: NDArray[np.float64], u: NDArray[np.float64], w: NDArray[np.float64]
) -> NDArray[np.float64]:
    gram = _triangle_gram(atoms[:, None], atoms[None, :])
    rhs = integrated_ecdf(u, w, atoms)
    try:
        return solve(gram, rhs, assume_a="pos")
    except LinAlgError:
        return lstsq(gram, rhs)[0]


def _gap_minimizers(
    atoms: NDArray[np.float64],
    weights: NDArray[np.float64],
    u: NDArray[np.float64],
    w: NDArray[np.float64],
    theta_upper: float,
) -> NDArray[np.float64]:
    """Minimizer of the directional derivative on every gap between observations.

    On (u_j, u_{j+1}) the derivative of H - Y is F_hat(theta) - F_n(u_j), which is
    nondecreasing, so the minimizer is the root of F_hat = F_n(u_j) clipped to the gap.
    """
    lo = u.copy()
    hi = np.append(u[1:], theta_upper)
    target = np.cumsum(w)
    target[-1] = 1.0

    f_lo = _mixture_cdf(atoms, weights, lo)
    f_hi = _mixture_cdf(atoms, weights, hi)
    out = np.where(f_lo >= target, lo, hi)
    inner = (f_lo < target) & (f_hi > target)
    if np.any(inner):
        a, b, goal = lo[inner], hi[inner], target[inner]
        for _ in range(_BISECTION_STEPS):
            mid = (a + b) / 2.0
            below = _mixture_cdf(atoms, weights, mid) < goal
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        out[inner] = (a + b) / 2.0
    return out[out > 0]


def _initial_atom(u: NDArray[np.float64], w: NDArray[np.float64], theta_upper: float) -> float:
    # Best single triangle: weight Y(theta) / (theta^3 / 3), criterion -Y^2 / (2 theta^3 / 3).
    grid = np.append(u[u > 0], theta_upper)
    y = integrated_ecdf(u, w, grid)
    return float(grid[np.argmax(y * y / (grid**3 / 3.0))])


def _mass(atoms: NDArray[np.float64], weights: NDArray[np.float64]) -> float:
    return float(np.sum(weights * atoms**2) / 2.0)


def _place_support_end(
    atoms: NDArray[np.float64],
    u: NDArray[np.float64],
    w: NDArray[np.float64],
    theta_upper: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]] | None:
    """Move the last atom to where the restricted mixture has unit mass.

    Beyond X_(n) the directional derivative has slope (mass - 1), so the optimal
    last atom is the root of mass(theta) = 1 with the other atoms held fixed. Returns
    None when no sign change is found or a weight turns nonpositive at the root.
    """
    x_max = float(u[-1])
    last = float(atoms[-1])
    if last <= x_max:
        return None
    prefix = atoms[:-1]

    def excess(theta: float) -> float:
        trial = np.append(prefix, theta)
        return _mass(trial, _restricted_weights(trial, u, w)) - 1.0

    start = excess(last)
    floor = max(x_max, float(prefix[-1]) if prefix.size else 0.0)
    edge = floor + 1e-9 * (last - floor) if start > 0 else theta_upper
    other = None
    for frac in np.logspace(-8, 0, 17):
        theta = last + frac * (edge - last)
        if np.sign(excess(theta)) != np.sign(start):
            other = float(theta)
            break
    if other is None:
        return None

    lo, hi = sorted((last, other))
    root = float(brentq(excess, lo, hi, xtol=1e-15 * x_max, rtol=_BRENT_RTOL))
    atoms = np.append(prefix, root)
    weights = _restricted_weights(atoms, u, w)
    if np.any(weights <= 0):
        return None
    return atoms, weights


def fit_convex_density_lse(
    data: SampleData, options: SolverOptions | None = None
) -> PiecewiseLinearFunction:
    """
    Fit the least-squares estimator of a convex nonincreasing density.

    Args:
        data: Nonnegative i.i.d. sample
        options: Solver options

    Returns:
        Convex, nonincreasing, nonnegative piecewise-linear density with knots at 0
        and at the mixture atoms, extended by zero to X_(n) when the support ends
        earlier. ``meta`` records atoms, weights, iterations, the final residual,
        the integral and the support end.

    Raises:
        InvalidInputError: If an observation is negative or all observations are zero
        ConvergenceError: If support reduction does not converge
    """
    opts = options or SolverOptions()
    data.require_nonnegative()
    u, w = data.collapse_ties()
    x_max = float(u[-1])
    if x_max <= 0:
        raise InvalidInputError("Degenerate sample: all observations are zero")

    theta_upper = SUPPORT_SEARCH_FACTOR * x_max
    tol = DENSITY_CHAR_RTOL * x_max
    atoms = np.array([_initial_atom(u, w, theta_upper)])
    weights = _restricted_weights(atoms, u, w)
    iterations = 0

    polish_rounds = 0

    while True:
        candidates = _gap_minimizers(atoms, weights, u, w, theta_upper)
        candidates = candidates[~np.isin(candidates, atoms)]
        j_star = 0
        residual = 0.0
        if candidates.size:
            derivs = _directional_derivative(atoms, weights, u, w, candidates)
            j_star = int(np.argmin(derivs))
            residual = float(-derivs[j_star])
        if residual <= tol:
            # Near the support end the directional derivative is nearly flat, so a small
            # residual can still leave the mass off; place the last atom exactly.
            if abs(_mass(atoms, weights) - 1.0) <= MASS_TOL or polish_rounds >= _POLISH_ROUNDS:
                break
            polish_rounds += 1
            placed = _place_support_end(atoms, u, w, theta_upper)
            if placed is None:
                break
            atoms, weights = placed
            continue
        if iterations >= opts.max_iterations:
            raise ConvergenceError(
                "Convex density support reduction did not converge",
                iterations=iterations,
                residual=residual,
            )
        iterations += 1

        order = np.argsort(np.append(atoms, candidates[j_star]))
        trial_atoms = np.append(atoms, candidates[j_star])[order]
        feasible = np.append(weights, 0.0)[order]
        while True:
            proposal = _restricted_weights(trial_atoms, u, w)
            negative = proposal <= 0
            if not np.any(negative):
                atoms, weights = trial_atoms, proposal
                break
            ratios = feasible[negative] / (feasible[negative] - proposal[negative])
            step = float(np.min(ratios))
            feasible = feasible + step * (proposal - feasible)
            drop = feasible <= 0
            drop[np.flatnonzero(negative)[np.argmin(ratios)]] = True
            trial_atoms, feasible = trial_atoms[~drop], feasible[~drop]
            if trial_atoms.size == 0:
                raise ConvergenceError(
                    "Support reduction removed every atom", iterations=iterations, residual=residual
                )

        logger.debug(
            "convex density iteration %d: added atom %.6g (%d atoms, residual %.3e)",
            iterations,
            candidates[j_star],
            atoms.size,
            residual,
        )

    support_end = float(atoms[-1])
    knots = np.union1d([0.0], atoms)
    if x_max > support_end:
        knots = np.append(knots, x_max)
    values = _triangle_values(atoms, weights, knots)
    integral = _mass(atoms, weights)
    if abs(integral - 1.0) > MASS_TOL:
        logger.warning("Convex density LSE mass off by %.2e", integral - 1.0)
    logger.debug(
        "convex density LSE converged after %d iterations (%d atoms, integral %.10f)",
        iterations,
        atoms.size,
        integral,
    )
    return PiecewiseLinearFunction(
        knots=knots,
        values=values,
        shape=Shape.CONVEX,
        meta={
            "atoms": atoms.tolist(),
            "weights": weights.tolist(),
            "iterations": iterations,
            "residual": max(residual, 0.0),
            "integral": integral,
            "support_end": support_end,
            "n": data.n,
        },
    )


def _triangle_values(
    atoms: NDArray[np.float64], weights: NDArray[np.float64], t: NDArray[np.float64]
) -> NDArray[np.float64]:
    return np.maximum(atoms[None, :] - t[:, None], 0.0) @ weights


def _integrated_fitted_cdf(fit: PiecewiseLinearFunction, t: ArrayLike) -> NDArray[np.float64]:
    """H(t) = int_{knots[0]}^t F_hat(s) ds for a density that vanishes outside its knots."""
    points = np.atleast_1d(np.asarray(t, dtype=np.float64))
    knots, values = fit.knots, fit.values
    widths = np.diff(knots)
    cdf_k = np.concatenate(([0.0], np.cumsum(widths * (values[:-1] + values[1:]) / 2.0)))
    h_k = np.concatenate(
        ([0.0], np.cumsum(widths * cdf_k[:-1] + widths**2 * (values[:-1] / 3.0 + values[1:] / 6.0)))
    )

    out = np.zeros_like(points)
    right = points >= knots[-1]
    out[right] = h_k[-1] + (points[right] - knots[-1]) * cdf_k[-1]
    inside = (points > knots[0]) & ~right
    if np.any(inside):
        ti = points[inside]
        seg = np.searchsorted(knots, ti, side="right") - 1
        step = ti - knots[seg]
        p = values[seg]
        q = np.interp(ti, knots, values)
        out[inside] = h_k[seg] + step * cdf_k[seg] + step**2 * (p / 3.0 + q / 6.0)
    return out


def check_convex_density_characterization(
    fit: PiecewiseLinearFunction, data: SampleData, tau: float | None = None
) -> CharacterizationReport:
    """
    Check the characterization of the convex-density LSE.

    d(theta) = int f_hat(x) (theta - x)_+ dx - (1/n) sum_i (theta - X_i)_+ must be
    >= -tau on a grid of observations, midpoints and knots, and within tau of zero at
    every kink inside the support. The boundary term is |int f_hat - 1| * X_(n).
    """
    u, w = data.collapse_ties()
    scale = float(max(u[-1], np.finfo(np.float64).tiny))
    tol = DENSITY_CHAR_RTOL * scale if tau is None else tau

    positive = np.flatnonzero(fit.values > 0)
    if positive.size == 0:
        support_end = fit.knots[0]
    else:
        support_end = fit.knots[min(positive[-1] + 1, fit.knots.size - 1)]
    kink_set = kinks(fit)
    kink_set = kink_set[(kink_set > 0) & (kink_set <= support_end)]

    grid = np.union1d(np.union1d(u, (u[:-1] + u[1:]) / 2.0), fit.knots)
    gap = _integrated_fitted_cdf(fit, grid) - integrated_ecdf(u, w, grid)
    if kink_set.size:
        kink_gap = _integrated_fitted_cdf(fit, kink_set) - integrated_ecdf(u, w, kink_set)
        max_kink_gap = float(np.max(np.abs(kink_gap)))
    else:
        max_kink_gap = 0.0
    boundary = abs(fit.integral() - 1.0) * scale

    min_gap = float(np.min(gap))
    return CharacterizationReport(
        min_gap=min_gap,
        max_kink_gap=max_kink_gap,
        boundary_gap=boundary,
        tolerance=tol,
        passed=min_gap >= -tol and max_kink_gap <= tol and boundary <= tol,
    )
