"""Tests for the exp-affine segment moments."""

import numpy as np
import pytest
from scipy import integrate

from shapeci.core.exp_integrals import (
    MASS_SERIES_CUTOFF,
    MOMENT_SERIES_CUTOFF,
    exp_affine_integral,
    exp_affine_moments,
)

WEIGHTS = {
    "i00": lambda t: 1.0,
    "i10": lambda t: 1.0 - t,
    "i01": lambda t: t,
    "i20": lambda t: (1.0 - t) ** 2,
    "i11": lambda t: t * (1.0 - t),
    "i02": lambda t: t**2,
}

ENDPOINTS = [
    (0.0, 0.0),
    (0.3, 0.3 + 1e-9),
    (1.0, 1.0 - MASS_SERIES_CUTOFF / 2),
    (-0.2, -0.2 + MOMENT_SERIES_CUTOFF / 3),
    (0.0, MOMENT_SERIES_CUTOFF * 1.01),
    (2.0, -3.0),
    (-5.0, 4.0),
    (-30.0, -1.0),
]


def _quad(a: float, b: float, weight: str) -> float:
    value, _ = integrate.quad(
        lambda t: WEIGHTS[weight](t) * np.exp((1.0 - t) * a + t * b),
        0.0,
        1.0,
        epsabs=0.0,
        epsrel=1e-13,
    )
    return value


class TestExpAffineMoments:
    """Tests for exp_affine_moments against numerical quadrature."""

    @pytest.mark.parametrize(("a", "b"), ENDPOINTS)
    @pytest.mark.parametrize("weight", list(WEIGHTS))
    def test_matches_quadrature(self, a: float, b: float, weight: str) -> None:
        """Test every moment on both sides of the series cutoffs."""
        moments = exp_affine_moments(a, b)
        assert getattr(moments, weight)[0] == pytest.approx(_quad(a, b, weight), rel=1e-9)

    def test_moments_are_consistent(self) -> None:
        """Test that weighted moments add up to the unweighted one."""
        a = np.array([0.0, -1.0, 3.0, 0.1])
        b = np.array([0.0, 2.0, -4.0, 0.1 + 1e-4])
        m = exp_affine_moments(a, b)
        np.testing.assert_allclose(m.i10 + m.i01, m.i00, rtol=1e-12)
        np.testing.assert_allclose(m.i20 + 2 * m.i11 + m.i02, m.i00, rtol=1e-12)

    def test_mirror_symmetry(self) -> None:
        """Test that swapping endpoints swaps the left and right weights."""
        fwd = exp_affine_moments(0.5, -2.0)
        back = exp_affine_moments(-2.0, 0.5)
        np.testing.assert_allclose(fwd.i10, back.i01)
        np.testing.assert_allclose(fwd.i20, back.i02)
        np.testing.assert_allclose(fwd.i11, back.i11)

    def test_broadcasts(self) -> None:
        """Test that a scalar broadcasts against an array."""
        m = exp_affine_moments(0.0, np.array([0.0, 1.0, 2.0]))
        assert m.i00.shape == (3,)

    def test_large_gap_has_no_overflow(self) -> None:
        """Test that a very negative endpoint stays finite."""
        m = exp_affine_moments(0.0, -800.0)
        assert np.all(np.isfinite(m.i00))
        assert m.i00[0] == pytest.approx(1.0 / 800.0)


class TestExpAffineIntegral:
    """Tests for the zeroth moment shortcut."""

    @pytest.mark.parametrize(("a", "b"), ENDPOINTS)
    def test_agrees_with_moments(self, a: float, b: float) -> None:
        """Test that the shortcut equals i00."""
        assert exp_affine_integral(a, b)[0] == pytest.approx(exp_affine_moments(a, b).i00[0])

    def test_constant_segment(self) -> None:
        """Test exp(c) for equal endpoints."""
        assert exp_affine_integral(1.0, 1.0)[0] == pytest.approx(np.e)
