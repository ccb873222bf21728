"""Brute-force reference solutions for small problems."""

from itertools import combinations

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from shapeci.core.exp_integrals import exp_affine_integral


def hinge_design(x: NDArray[np.float64], knots: tuple[int, ...]) -> NDArray[np.float64]:
    """Columns 1, x and (x - x_k)_+ for every chosen interior knot."""
    columns = [np.ones_like(x), x] + [np.maximum(x - x[k], 0.0) for k in knots]
    return np.column_stack(columns)


def brute_force_convex_lse(x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Convex LSE by enumerating every interior knot set.

    Each knot set gives an unconstrained least-squares fit; the best fit whose
    hinge coefficients are all nonnegative is the convex LSE.
    """
    n = x.size
    best_rss = np.inf
    best = np.full(n, np.nan)
    interior = range(1, n - 1)
    for size in range(0, n - 1):
        for knots in combinations(interior, size):
            design = hinge_design(x, knots)
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            if np.any(coef[2:] < -1e-10):
                continue
            fitted = design @ coef
            rss = float(np.sum((y - fitted) ** 2))
            if rss < best_rss - 1e-14:
                best_rss, best = rss, fitted
    return best


def log_concave_criterion(
    u: NDArray[np.float64], w: NDArray[np.float64], c: NDArray[np.float64]
) -> float:
    """sum_i w_i phi(u_i) - int exp(phi) for phi interpolating c at u."""
    mass = float(np.sum(np.diff(u) * exp_affine_integral(c[:-1], c[1:])))
    return float(w @ c) - mass


def three_point_log_concave(u: NDArray[np.float64]) -> NDArray[np.float64]:
    """Log-concave MLE at three distinct points by constrained optimization."""
    w = np.full(3, 1.0 / 3.0)
    widths = np.diff(u)

    def concavity(c: NDArray[np.float64]) -> float:
        return (c[1] - c[0]) / widths[0] - (c[2] - c[1]) / widths[1]

    start = np.full(3, -np.log(u[-1] - u[0]))
    result = minimize(
        lambda c: -log_concave_criterion(u, w, c),
        start,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": concavity}],
        options={"ftol": 1e-14, "maxiter": 500},
    )
    return np.asarray(result.x)


def convex_density_criterion(
    knots: NDArray[np.float64], values: NDArray[np.float64], obs: NDArray[np.float64]
) -> float:
    """1/2 int f^2 - mean f(X_i) for a piecewise-linear f vanishing beyond its last knot."""
    widths = np.diff(knots)
    p, q = values[:-1], values[1:]
    energy = float(np.sum(widths * (p * p + p * q + q * q) / 3.0))
    fitted = np.interp(obs, knots, values, right=0.0)
    return 0.5 * energy - float(np.mean(fitted))


def grid_convex_density(obs: NDArray[np.float64], grid: NDArray[np.float64]) -> float:
    """
    Criterion value of the best triangle mixture with atoms restricted to ``grid``.

    Solved as a bound-constrained quadratic program with L-BFGS-B.
    """
    a = np.minimum.outer(grid, grid)
    b = np.maximum.outer(grid, grid)
    gram = a * a * b / 2.0 - a**3 / 6.0
    linear = np.array([np.mean(np.maximum(t - obs, 0.0)) for t in grid])

    result = minimize(
        lambda w: 0.5 * w @ gram @ w - linear @ w,
        np.full(grid.size, 1e-3),
        jac=lambda w: gram @ w - linear,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * grid.size,
        options={"maxiter": 20_000, "ftol": 1e-15, "gtol": 1e-12},
    )
    return float(result.fun)


def exhaustive_convex_density(obs: NDArray[np.float64], grid: NDArray[np.float64]) -> float:
    """
    Criterion value of the best triangle mixture with atoms in ``grid``, by enumeration.

    Every subset of atoms is solved with the nonnegativity constraints dropped; the
    smallest criterion among subsets with positive weights is the constrained optimum
    over the grid (the KKT point is one of them).
    """
    a = np.minimum.outer(grid, grid)
    b = np.maximum.outer(grid, grid)
    gram = a * a * b / 2.0 - a**3 / 6.0
    linear = np.array([np.mean(np.maximum(t - obs, 0.0)) for t in grid])

    best = 0.0
    for size in range(1, grid.size + 1):
        for subset in combinations(range(grid.size), size):
            idx = list(subset)
            weights = np.linalg.solve(gram[np.ix_(idx, idx)], linear[idx])
            if np.all(weights > 0):
                best = min(best, -0.5 * float(linear[idx] @ weights))
    return best
