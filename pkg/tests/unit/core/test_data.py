"""Tests for the regression and sample containers."""

import numpy as np
import pytest

from shapeci.core.data import RegressionData, SampleData, integrated_ecdf
from shapeci.core.errors import InvalidInputError


class TestRegressionData:
    """Tests for RegressionData validation."""

    def test_valid_pairs(self) -> None:
        """Test that well-formed pairs are accepted and frozen."""
        data = RegressionData(x=[0.0, 0.5, 1.0], y=[1.0, -3.0, 2.0])
        assert data.n == 3
        assert data.span == 1.0
        assert data.y_scale == 3.0
        with pytest.raises(ValueError):
            data.y[0] = 0.0

    def test_duplicate_design_points_rejected(self) -> None:
        """Test that repeated x values are rejected."""
        with pytest.raises(InvalidInputError, match="strictly increasing"):
            RegressionData(x=[0.0, 1.0, 1.0], y=[0.0, 1.0, 2.0])

    def test_length_mismatch(self) -> None:
        """Test that x and y must have equal length."""
        with pytest.raises(InvalidInputError, match="differ in length"):
            RegressionData(x=[0.0, 1.0], y=[0.0])

    def test_too_few_points(self) -> None:
        """Test that a single pair is rejected."""
        with pytest.raises(InvalidInputError, match="n >= 2"):
            RegressionData(x=[0.0], y=[1.0])

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite_rejected(self, bad: float) -> None:
        """Test that NaN and infinities are rejected."""
        with pytest.raises(InvalidInputError, match="non-finite"):
            RegressionData(x=[0.0, 1.0], y=[bad, 1.0])

    def test_non_numeric_rejected(self) -> None:
        """Test that strings are rejected."""
        with pytest.raises(InvalidInputError, match="numeric"):
            RegressionData(x=["a", "b"], y=[0.0, 1.0])


class TestSampleData:
    """Tests for SampleData."""

    def test_observations_are_sorted(self) -> None:
        """Test that observations are stored in increasing order."""
        data = SampleData(obs=[3.0, 1.0, 2.0])
        np.testing.assert_array_equal(data.obs, [1.0, 2.0, 3.0])
        assert data.n == 3

    def test_collapse_ties(self) -> None:
        """Test that ties become weights summing to one."""
        values, weights = SampleData(obs=[1.0, 2.0, 1.0, 1.0]).collapse_ties()
        np.testing.assert_array_equal(values, [1.0, 2.0])
        np.testing.assert_allclose(weights, [0.75, 0.25])

    def test_require_nonnegative(self) -> None:
        """Test the nonnegativity check used by the convex-density model."""
        SampleData(obs=[0.0, 1.0]).require_nonnegative()
        with pytest.raises(InvalidInputError, match="obs >= 0"):
            SampleData(obs=[-0.1, 1.0]).require_nonnegative()

    def test_single_observation_rejected(self) -> None:
        """Test that n = 1 is rejected."""
        with pytest.raises(InvalidInputError):
            SampleData(obs=[1.0])


class TestIntegratedEcdf:
    """Tests for the integrated empirical distribution function."""

    def test_matches_direct_sum(self) -> None:
        """Test against the defining sum of positive parts."""
        values = np.array([0.0, 1.0, 3.0])
        weights = np.array([0.5, 0.25, 0.25])
        t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0, 4.0])
        expected = [np.sum(weights * np.maximum(s - values, 0.0)) for s in t]
        np.testing.assert_allclose(integrated_ecdf(values, weights, t), expected)

    def test_scalar_input(self) -> None:
        """Test that a scalar point returns a length-one array."""
        result = integrated_ecdf(np.array([0.0]), np.array([1.0]), 2.0)
        assert result.shape == (1,)
        assert result[0] == pytest.approx(2.0)
