"""Closed-form integrals of exp(affine) over a segment.

For a segment on which the log-density is affine with endpoint values ``a`` and
``b``, every integral the log-concave solver needs reduces to

    I_pq(a, b) = int_0^1 (1-t)^p t^q exp((1-t) a + t b) dt,   p + q <= 2.

The integrand is factored around the larger endpoint so that only
``exp(-s * |b - a|)`` with s in [0, 1] is ever evaluated, and a power series
replaces the closed form when ``|b - a|`` is small enough for the closed form to
cancel catastrophically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

# Below this |b - a| the zeroth moment switches to its series.
MASS_SERIES_CUTOFF = 1e-6
# The weighted moments cancel to order |b - a|^(p+q+1); they switch much earlier.
MOMENT_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 24


def _series_coefficients(k: int, l: int) -> NDArray[np.float64]:
    # int_0^1 s^k (1-s)^l exp(-s D) ds = sum_j (-D)^j / j! * B(k + j + 1, l + 1)
    return np.array(
        [
            (-1) ** j
            * math.factorial(k + j)
            * math.factorial(l)
            / (math.factorial(j) * math.factorial(k + j + l + 1))
            for j in range(_SERIES_TERMS)
        ]
    )


_COEFFS = {kl: _series_coefficients(*kl) for kl in [(0, 0), (1, 0), (2, 0)]}


def _series(kl: tuple[int, int], d: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.polynomial.polynomial.polyval(d, _COEFFS[kl])


def _decaying_moments(
    d: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """g_k(D) = int_0^1 s^k exp(-s D) ds for k = 0, 1, 2 and D >= 0."""
    g0 = np.empty_like(d)
    g1 = np.empty_like(d)
    g2 = np.empty_like(d)

    small = d < MASS_SERIES_CUTOFF
    g0[small] = _series((0, 0), d[small])
    big = ~small
    g0[big] = -np.expm1(-d[big]) / d[big]

    small = d < MOMENT_SERIES_CUTOFF
    g1[small] = _series((1, 0), d[small])
    g2[small] = _series((2, 0), d[small])
    big = ~small
    db = d[big]
    e = np.exp(-db)
    g1[big] = (1.0 - e * (1.0 + db)) / db**2
    g2[big] = (2.0 - e * (db**2 + 2.0 * db + 2.0)) / db**3
    return g0, g1, g2


@dataclass(frozen=True)
class ExpAffineMoments:
    """Moments I_pq of exp((1-t) a + t b) over t in [0, 1].

    ``i10`` weights the integrand by (1-t), ``i01`` by t, and so on.
    """

    i00: NDArray[np.float64]
    i10: NDArray[np.float64]
    i01: NDArray[np.float64]
    i20: NDArray[np.float64]
    i11: NDArray[np.float64]
    i02: NDArray[np.float64]


def exp_affine_moments(a: ArrayLike, b: ArrayLike) -> ExpAffineMoments:
    """
    Vectorized moments of exp(affine) on the unit interval.

    Args:
        a: Log-values at the left endpoints
        b: Log-values at the right endpoints

    Returns:
        ExpAffineMoments with arrays broadcast to the common shape of a and b
    """
    a_arr, b_arr = np.broadcast_arrays(
        np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    )
    a_arr = np.atleast_1d(a_arr).astype(np.float64)
    b_arr = np.atleast_1d(b_arr).astype(np.float64)

    rising = b_arr >= a_arr
    top = np.where(rising, b_arr, a_arr)
    g0, g1, g2 = _decaying_moments(np.abs(b_arr - a_arr))

    # s measures distance from the larger endpoint: s = 1 - t when rising, s = t otherwise.
    g_s0 = g0
    g_s1 = g1
    g_s2 = g2
    g_c1 = g0 - g1  # int (1 - s) exp(-sD)
    g_c2 = g0 - 2.0 * g1 + g2  # int (1 - s)^2 exp(-sD)
    g_mix = g1 - g2  # int s (1 - s) exp(-sD)

    with np.errstate(over="ignore"):
        scale = np.exp(top)
    return ExpAffineMoments(
        i00=scale * g_s0,
        i10=scale * np.where(rising, g_s1, g_c1),
        i01=scale * np.where(rising, g_c1, g_s1),
        i20=scale * np.where(rising, g_s2, g_c2),
        i11=scale * g_mix,
        i02=scale * np.where(rising, g_c2, g_s2),
    )


def exp_affine_integral(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """int_0^1 exp((1-t) a + t b) dt, vectorized."""
    a_arr = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b_arr = np.atleast_1d(np.asarray(b, dtype=np.float64))
    top = np.maximum(a_arr, b_arr)
    d = np.abs(b_arr - a_arr)
    g0 = np.empty_like(d)
    small = d < MASS_SERIES_CUTOFF
    g0[small] = _series((0, 0), d[small])
    g0[~small] = -np.expm1(-d[~small]) / d[~small]
    with np.errstate(over="ignore"):
        return np.exp(top) * g0
