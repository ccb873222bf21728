"""Tests for configuration value validators."""

import pytest

from shapeci.config.validation import (
    validate_delta,
    validate_level,
    validate_n_grid,
    validate_workers,
)


class TestValidateLevel:
    """Tests for validate_level."""

    @pytest.mark.parametrize("level", [0.5, 0.9, 0.95, 0.999])
    def test_valid(self, level: float) -> None:
        """Test levels strictly inside (0, 1)."""
        assert validate_level(level) is True

    @pytest.mark.parametrize("level", [0.0, 1.0, -0.1, 95.0])
    def test_invalid(self, level: float) -> None:
        """Test levels on or outside the boundary."""
        with pytest.raises(ValueError, match="Confidence level"):
            validate_level(level)


class TestValidateDelta:
    """Tests for validate_delta."""

    def test_valid(self) -> None:
        """Test a typical tail probability."""
        assert validate_delta(0.05) is True

    def test_invalid(self) -> None:
        """Test delta = 1."""
        with pytest.raises(ValueError, match="delta"):
            validate_delta(1.0)


class TestValidateNGrid:
    """Tests for validate_n_grid."""

    def test_valid(self) -> None:
        """Test an ascending grid."""
        assert validate_n_grid([100, 200, 500]) is True

    def test_empty(self) -> None:
        """Test that an empty grid is rejected."""
        with pytest.raises(ValueError, match="cannot be empty"):
            validate_n_grid([])

    def test_not_ascending(self) -> None:
        """Test that repeated or descending sizes are rejected."""
        with pytest.raises(ValueError, match="strictly ascending"):
            validate_n_grid([100, 100])
        with pytest.raises(ValueError, match="strictly ascending"):
            validate_n_grid([200, 100])

    def test_below_minimum(self) -> None:
        """Test the minimum sample size."""
        with pytest.raises(ValueError, match="at least 3"):
            validate_n_grid([2, 10], minimum=3)


class TestValidateWorkers:
    """Tests for validate_workers."""

    @pytest.mark.parametrize(
        ("workers", "expected"), [(1, True), (512, True), (0, False), (513, False)]
    )
    def test_bounds(self, workers: int, expected: bool) -> None:
        """Test the inclusive worker bounds."""
        assert validate_workers(workers) is expected

