"""Log-concave density maximum likelihood.

The estimator maximizes

    L(phi) = sum_i w_i phi(X_i) - int exp(phi)

over concave phi, where w_i are the empirical weights of the distinct
observations. The maximizer is piecewise linear with kinks at a subset of the
observations and automatically integrates to one.

The solver is an active-set method over knot subsets: for a fixed knot set the
criterion is a smooth concave function of the values at the knots and is
maximized by damped Newton steps; knots are added where the directional
derivative of a concave hinge is positive and removed (after stepping back to the
feasible segment) where an unconstrained solution turns convex. Every accepted
step increases the criterion.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, lstsq, solve

from ..core.data import SampleData, integrated_ecdf
from ..core.errors import ConvergenceError, InvalidInputError
from ..core.exp_integrals import exp_affine_integral, exp_affine_moments
from ..core.piecewise import (
    LinearPiece,
    ModeBracket,
    PiecewiseLinearFunction,
    Shape,
    kinks,
    linear_piece_containing,
    mode_bracket,
)
from .convex_lse import CharacterizationReport, SolverOptions

logger = logging.getLogger(__name__)

# Relative tolerance of the density characterizations (units of the sample span).
DENSITY_CHAR_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class LogConcaveFit:
    """Log-concave MLE: a concave piecewise-linear log-density on [X_(1), X_(n)].

    Attributes:
        phi: Concave log-density; knots are (distinct) observations
        n: Sample size the fit was computed from
        meta: Solver diagnostics
    """

    phi: PiecewiseLinearFunction
    n: int
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.phi.shape is not Shape.CONCAVE:
            raise InvalidInputError("A log-concave fit needs a concave log-density")
        if self.n < 2:
            raise InvalidInputError(f"Sample size must be at least 2, got {self.n}")

    @property
    def support(self) -> tuple[float, float]:
        return self.phi.domain

    def _segments(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        widths = np.diff(self.phi.knots)
        masses = widths * exp_affine_integral(self.phi.values[:-1], self.phi.values[1:])
        return widths, masses

    def integral(self) -> float:
        """Total mass of exp(phi) over the support (closed form per segment)."""
        return float(np.sum(self._segments()[1]))

    def log_density(self, t: ArrayLike) -> Any:
        points = np.atleast_1d(np.asarray(t, dtype=np.float64))
        lo, hi = self.support
        inside = (points >= lo) & (points <= hi)
        out = np.full(points.shape, -np.inf)
        out[inside] = np.interp(points[inside], self.phi.knots, self.phi.values)
        return float(out[0]) if np.ndim(t) == 0 else out

    def density(self, t: ArrayLike) -> Any:
        """exp(phi(t)) on the support, 0 outside."""
        logs = self.log_density(t)
        return float(np.exp(logs)) if np.ndim(logs) == 0 else np.exp(logs)

    def cdf(self, t: ArrayLike) -> Any:
        points = np.atleast_1d(np.asarray(t, dtype=np.float64))
        knots, values = self.phi.knots, self.phi.values
        _, masses = self._segments()
        cum = np.concatenate(([0.0], np.cumsum(masses)))

        seg = np.clip(np.searchsorted(knots, points, side="right") - 1, 0, knots.size - 2)
        clipped = np.clip(points, knots[0], knots[-1])
        phi_t = np.interp(clipped, knots, values)
        partial = (clipped - knots[seg]) * exp_affine_integral(values[seg], phi_t)
        out = cum[seg] + partial
        return float(out[0]) if np.ndim(t) == 0 else out

    def integrated_cdf(self, t: ArrayLike) -> NDArray[np.float64]:
        """H(t) = int_{-inf}^t F(s) ds for every t (F the fitted distribution function)."""
        points = np.atleast_1d(np.asarray(t, dtype=np.float64))
        return _integrated_cdf(self.phi.knots, self.phi.values, points)

    def point_estimates(self, x0: float, piece: LinearPiece) -> tuple[float, float]:
        """Density at x0 and its derivative density(x0) * phi'(x0) on the piece."""
        value = self.density(x0)
        return value, value * piece.slope

    def linear_piece_containing(self, x0: float, tau_kink: float | None = None) -> LinearPiece:
        return linear_piece_containing(self.phi, x0, tau_kink)

    def mode_bracket(self, tau_kink: float | None = None) -> ModeBracket:
        return mode_bracket(self.phi, tau_kink)

    def to_dict(self) -> dict[str, Any]:
        payload = self.phi.to_dict()
        payload["meta"] = {**dict(self.meta), "n": self.n}
        return payload

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LogConcaveFit:
        phi = PiecewiseLinearFunction.from_dict({**data, "shape": Shape.CONCAVE.value})
        meta = dict(phi.meta)
        if "n" not in meta:
            raise InvalidInputError("Log-concave fit file must record the sample size in meta.n")
        return cls(phi=phi, n=int(meta.pop("n")), meta=meta)


def _integrated_cdf(
    knots: NDArray[np.float64], values: NDArray[np.float64], t: NDArray[np.float64]
) -> NDArray[np.float64]:
    widths = np.diff(knots)
    mom = exp_affine_moments(values[:-1], values[1:])
    masses = widths * mom.i00
    cdf_k = np.concatenate(([0.0], np.cumsum(masses)))
    # H at knots: H_{j+1} = H_j + w_j F_j + w_j^2 int (1-t) exp(...)
    h_k = np.concatenate(([0.0], np.cumsum(widths * cdf_k[:-1] + widths**2 * mom.i10)))

    out = np.zeros_like(t)
    right = t >= knots[-1]
    out[right] = h_k[-1] + (t[right] - knots[-1]) * cdf_k[-1]
    inside = (t > knots[0]) & ~right
    if np.any(inside):
        ti = t[inside]
        seg = np.searchsorted(knots, ti, side="right") - 1
        phi_t = np.interp(ti, knots, values)
        step = ti - knots[seg]
        tail = exp_affine_moments(values[seg], phi_t).i10
        out[inside] = h_k[seg] + step * cdf_k[seg] + step**2 * tail
    return out


def _hat_matrix(u: NDArray[np.float64], knot_idx: NDArray[np.intp]) -> sp.csr_matrix:
    knot_u = u[knot_idx]
    k = knot_idx.size
    seg = np.clip(np.searchsorted(knot_u, u, side="right") - 1, 0, k - 2)
    lam = (u - knot_u[seg]) / (knot_u[seg + 1] - knot_u[seg])
    rows = np.arange(u.size)
    return sp.csr_matrix(
        (
            np.concatenate((1.0 - lam, lam)),
            (np.concatenate((rows, rows)), np.concatenate((seg, seg + 1))),
        ),
        shape=(u.size, k),
    )


class _Criterion:
    """Log-likelihood criterion restricted to a knot set, with gradient and Hessian."""

    def __init__(self, u: NDArray[np.float64], w: NDArray[np.float64], knot_idx: NDArray[np.intp]):
        self.u = u
        self.w = w
        self.widths = np.diff(u)
        self.hat = _hat_matrix(u, knot_idx)

    def value(self, c: NDArray[np.float64]) -> float:
        phi = self.hat @ c
        with np.errstate(over="ignore", invalid="ignore"):
            mass = float(np.sum(self.widths * exp_affine_integral(phi[:-1], phi[1:])))
            total = float(self.w @ phi) - mass
        return total if np.isfinite(total) else -np.inf

    def gradient_hessian(
        self, c: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        phi = self.hat @ c
        m = phi.size
        mom = exp_affine_moments(phi[:-1], phi[1:])
        d = self.widths

        grad_phi = self.w.copy()
        grad_phi[:-1] -= d * mom.i10
        grad_phi[1:] -= d * mom.i01

        diag = np.zeros(m)
        diag[:-1] += d * mom.i20
        diag[1:] += d * mom.i02
        off = d * mom.i11
        curvature = sp.diags([off, diag, off], [-1, 0, 1], format="csr")

        grad = self.hat.T @ grad_phi
        neg_hess = (self.hat.T @ curvature @ self.hat).toarray()
        return np.asarray(grad), neg_hess


# Criterion increases below this many ulps of the criterion value are noise.
_VALUE_ULPS = 10.0


def _newton_maximize(
    criterion: _Criterion, c0: NDArray[np.float64], opts: SolverOptions
) -> tuple[NDArray[np.float64], float, int, float]:
    """
    Damped Newton ascent; returns (c, value, steps, gradient sup-norm).

    Stops once the gradient sup-norm drops below grad_tol times the total weight,
    or once the predicted or the realized increase of the criterion is below
    floating-point resolution of its value. A point whose gradient is within
    sqrt(grad_tol) is accepted when the line search or the step budget runs out.
    """
    c = c0.copy()
    value = criterion.value(c)
    scale = float(np.sum(criterion.w))
    grad_tol = opts.grad_tol * scale
    loose_tol = np.sqrt(opts.grad_tol) * scale
    grad_norm = np.inf
    for step in range(opts.max_newton_steps):
        grad, neg_hess = criterion.gradient_hessian(c)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= grad_tol:
            return c, value, step, grad_norm

        try:
            direction = solve(neg_hess, grad, assume_a="pos")
        except LinAlgError:
            direction = lstsq(neg_hess, grad)[0]

        resolution = _VALUE_ULPS * np.finfo(np.float64).eps * max(abs(value), scale)
        decrement = float(grad @ direction)
        if decrement <= resolution and grad_norm <= loose_tol:
            return c, value, step, grad_norm

        t = 1.0
        accepted = False
        for _ in range(60):
            trial = c + t * direction
            trial_value = criterion.value(trial)
            if trial_value >= value + 1e-4 * t * decrement:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if grad_norm <= loose_tol:
                return c, value, step, grad_norm
            raise ConvergenceError(
                "Log-concave Newton line search failed", iterations=step, residual=grad_norm
            )
        gain = trial_value - value
        c, value = trial, trial_value
        if gain <= resolution and grad_norm <= loose_tol:
            return c, value, step + 1, grad_norm

    if grad_norm <= loose_tol:
        logger.debug("Newton budget spent at |grad|=%.2e; accepting", grad_norm)
        return c, value, opts.max_newton_steps, grad_norm
    raise ConvergenceError(
        "Log-concave Newton iterations exhausted",
        iterations=opts.max_newton_steps,
        residual=grad_norm,
    )


def _slope_changes(
    u: NDArray[np.float64], knot_idx: NDArray[np.intp], c: NDArray[np.float64]
) -> NDArray[np.float64]:
    slopes = np.diff(c) / np.diff(u[knot_idx])
    return np.diff(slopes)


def fit_log_concave_mle(
    data: SampleData, options: SolverOptions | None = None
) -> LogConcaveFit:
    """
    Compute the log-concave maximum likelihood estimator.

    Args:
        data: i.i.d. sample (ties are collapsed to weighted observations)
        options: Solver options

    Returns:
        Normalized LogConcaveFit supported on [X_(1), X_(n)]

    Raises:
        InvalidInputError: If every observation is equal
        ConvergenceError: If Newton or the active-set loop fails to converge
    """
    opts = options or SolverOptions()
    u, w = data.collapse_ties()
    m = u.size
    if m < 2:
        raise InvalidInputError("Degenerate sample: all observations are equal")

    span = float(u[-1] - u[0])
    tol = DENSITY_CHAR_RTOL * span
    knot_idx = np.array([0, m - 1], dtype=np.intp)
    c = np.full(2, -np.log(span))
    criterion = _Criterion(u, w, knot_idx)
    value = criterion.value(c)

    iterations = 0
    newton_steps = 0
    grad_norm = 0.0
    residual = np.inf
    while True:
        c_star, value_star, steps, grad_norm = _newton_maximize(criterion, c, opts)
        newton_steps += steps
        if value_star < value:
            # Newton only accepts ascent steps; equality is the converged case.
            raise ConvergenceError(
                "Log-concave criterion decreased",
                iterations=iterations,
                residual=value - value_star,
            )

        beta_star = _slope_changes(u, knot_idx, c_star)
        eps = 1e-12 * (float(np.max(np.abs(np.diff(c_star) / np.diff(u[knot_idx])))) + 1.0)
        convex = beta_star > eps
        if np.any(convex):
            beta_old = _slope_changes(u, knot_idx, c)
            ratios = -beta_old[convex] / (beta_star[convex] - beta_old[convex])
            t = float(np.min(ratios))
            c = c + t * (c_star - c)
            beta_mid = _slope_changes(u, knot_idx, c)
            drop = beta_mid >= -eps
            drop[np.flatnonzero(convex)[np.argmin(ratios)]] = True
            keep = np.concatenate(([True], ~drop, [True]))
            knot_idx, c = knot_idx[keep], c[keep]
            criterion = _Criterion(u, w, knot_idx)
            value = criterion.value(c)
            iterations += 1
            continue

        c, value = c_star, value_star
        phi = criterion.hat @ c
        gap = _integrated_cdf(u, phi, u) - integrated_ecdf(u, w, u)
        gap[knot_idx] = -np.inf
        j_star = int(np.argmax(gap))
        residual = float(gap[j_star])
        if residual <= tol:
            break
        if iterations >= opts.max_iterations:
            raise ConvergenceError(
                "Log-concave active set did not converge", iterations=iterations, residual=residual
            )
        iterations += 1
        knot_idx = np.sort(np.append(knot_idx, j_star))
        c = phi[knot_idx]
        criterion = _Criterion(u, w, knot_idx)
        logger.debug(
            "log-concave iteration %d: added knot %.6g (%d knots, gap %.3e)",
            iterations,
            u[j_star],
            knot_idx.size,
            residual,
        )

    phi = criterion.hat @ c
    total = float(np.sum(np.diff(u) * exp_affine_integral(phi[:-1], phi[1:])))
    phi = phi - np.log(total)
    logger.debug(
        "log-concave MLE converged: %d active-set iterations, %d Newton steps, |grad|=%.2e",
        iterations,
        newton_steps,
        grad_norm,
    )
    return LogConcaveFit(
        phi=PiecewiseLinearFunction(knots=u, values=phi, shape=Shape.CONCAVE),
        n=data.n,
        meta={
            "iterations": iterations,
            "newton_steps": newton_steps,
            "gradient_norm": grad_norm,
            "residual": max(residual, 0.0),
            "log_likelihood": value,
        },
    )


def check_logconcave_characterization(
    fit: LogConcaveFit, data: SampleData, tau: float | None = None
) -> CharacterizationReport:
    """
    Check that the integrated fitted CDF is majorized by the integrated empirical CDF.

    The gap Y_n(t) - H_n(t; phi) is evaluated on the observations, the midpoints
    between them and the fit's kinks; it must be >= -tau everywhere and within tau
    of zero at kinks. The boundary term is the normalization error times the span.
    """
    u, w = data.collapse_ties()
    span = float(u[-1] - u[0]) if u.size > 1 else 1.0
    tol = DENSITY_CHAR_RTOL * span if tau is None else tau

    kink_set = kinks(fit.phi)
    grid = np.union1d(np.union1d(u, (u[:-1] + u[1:]) / 2.0), kink_set)
    gap = integrated_ecdf(u, w, grid) - fit.integrated_cdf(grid)
    kink_gap = integrated_ecdf(u, w, kink_set) - fit.integrated_cdf(kink_set)
    boundary = abs(fit.integral() - 1.0) * span

    min_gap = float(np.min(gap))
    max_kink_gap = float(np.max(np.abs(kink_gap)))
    return CharacterizationReport(
        min_gap=min_gap,
        max_kink_gap=max_kink_gap,
        boundary_gap=boundary,
        tolerance=tol,
        passed=min_gap >= -tol and max_kink_gap <= tol and boundary <= tol,
    )
