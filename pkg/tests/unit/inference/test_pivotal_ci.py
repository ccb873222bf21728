"""Tests for LNE confidence intervals and nuisance scales."""

import math

import numpy as np
import pytest

from shapeci.core.data import RegressionData, SampleData
from shapeci.core.errors import (
    DegenerateGeometryError,
    InvalidInputError,
    MissingNuisanceError,
    MissingStatisticError,
    OutOfRangeError,
)
from shapeci.core.piecewise import (
    LinearPiece,
    ModeBracket,
    PiecewiseLinearFunction,
    linear_piece_containing,
)
from shapeci.estimators.log_concave import fit_log_concave_mle
from shapeci.inference.pivotal_ci import (
    NONNEGATIVE,
    NuisanceScale,
    Target,
    ci_derivative,
    ci_generic,
    ci_mode,
    ci_value,
    estimate_sigma,
    local_design_density,
    nuisance_a_random_design,
    nuisance_deconvolution,
    nuisance_hazard,
    nuisance_logconcave,
)
from shapeci.inference.tables import CriticalValueTable, TableMeta


@pytest.fixture
def wide_fit() -> PiecewiseLinearFunction:
    """Convex fit with a piece of width 4 on [0, 4] and slope -1."""
    return PiecewiseLinearFunction(np.array([0.0, 4.0, 5.0]), np.array([4.0, 0.0, 1.0]))


@pytest.fixture
def wide_piece(wide_fit: PiecewiseLinearFunction) -> LinearPiece:
    """Linear piece of the wide fit containing x0 = 2."""
    return linear_piece_containing(wide_fit, 2.0)


class TestValueAndDerivative:
    """Tests for ci_value and ci_derivative."""

    def test_value_interval(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test f_hat +/- a c / sqrt(n (v - u)) with tabulated absL0."""
        ci = ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(1.0), 0.05, builtin_table)
        half = 2.13 / math.sqrt(25 * 4.0)
        assert ci.estimate == pytest.approx(2.0)
        assert (ci.lower, ci.upper) == pytest.approx((2.0 - half, 2.0 + half))
        assert ci.level == pytest.approx(0.95)
        assert ci.target is Target.VALUE
        assert not ci.clamped

    def test_derivative_interval(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test slope +/- a c / sqrt(n (v - u)^3) with tabulated absL1."""
        ci = ci_derivative(wide_fit, wide_piece, 2.0, 25, NuisanceScale(1.0), 0.05, builtin_table)
        assert ci.estimate == pytest.approx(-1.0)
        assert ci.length == pytest.approx(2.0 * 9.0 / 40.0)
        assert ci.midpoint == pytest.approx(-1.0)

    def test_scale_enters_linearly(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test that doubling a_hat doubles the length."""
        one = ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(1.0), 0.05, builtin_table)
        two = ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(2.0), 0.05, builtin_table)
        assert two.length == pytest.approx(2.0 * one.length)

    def test_zero_scale_gives_point(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test that a_hat = 0 collapses the interval to the estimate."""
        ci = ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(0.0), 0.05, builtin_table)
        assert ci.lower == ci.upper == pytest.approx(2.0)

    def test_higher_level_nests(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test that the 99% interval contains the 90% interval."""
        scale = NuisanceScale(1.5)
        narrow = ci_value(wide_fit, wide_piece, 2.0, 25, scale, 0.10, builtin_table)
        wide = ci_value(wide_fit, wide_piece, 2.0, 25, scale, 0.01, builtin_table)
        assert wide.covers(narrow)
        assert wide.contains(narrow.estimate)

    def test_nonnegative_domain_clamps(
        self, wide_piece: LinearPiece, builtin_table: CriticalValueTable
    ) -> None:
        """Test that a density interval is cut at zero and flagged."""
        fit = PiecewiseLinearFunction(np.array([0.0, 4.0, 5.0]), np.array([0.05, 0.01, 0.0]))
        piece = linear_piece_containing(fit, 2.0)
        ci = ci_value(fit, piece, 2.0, 25, NuisanceScale(1.0), 0.05, builtin_table, NONNEGATIVE)
        assert ci.lower == 0.0
        assert ci.clamped
        assert ci.upper > ci.estimate

    def test_x0_outside_piece(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test that the piece must contain x0."""
        with pytest.raises(OutOfRangeError, match="outside the linear piece"):
            ci_value(wide_fit, wide_piece, 4.5, 25, NuisanceScale(1.0), 0.05, builtin_table)

    def test_missing_statistic(
        self, wide_fit: PiecewiseLinearFunction, wide_piece: LinearPiece
    ) -> None:
        """Test that a table without absL0 cannot build value intervals."""
        table = CriticalValueTable(samples={"absL1": [1.0, 2.0]}, meta=TableMeta(2, 10, "x"))
        with pytest.raises(MissingStatisticError):
            ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(1.0), 0.05, table)

    def test_invalid_delta(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test that delta must lie in (0, 1)."""
        with pytest.raises(InvalidInputError):
            ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(1.0), 1.5, builtin_table)

    def test_to_dict(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test the JSON payload of an interval."""
        ci = ci_value(wide_fit, wide_piece, 2.0, 25, NuisanceScale(1.0), 0.05, builtin_table)
        payload = ci.to_dict()
        assert payload["target"] == "value"
        assert payload["x0"] == 2.0
        assert payload["piece"] == {"u": 0.0, "v": 4.0}
        assert payload["at_kink"] is False
        assert "bracket" not in payload


class TestModeInterval:
    """Tests for ci_mode."""

    def test_mode_interval(self, builtin_table: CriticalValueTable) -> None:
        """Test m_hat +/- c(|M|) (v_m - u_m)."""
        ci = ci_mode(ModeBracket(m_hat=1.0, u_m=0.0, v_m=2.0), 0.05, builtin_table)
        assert (ci.lower, ci.upper) == pytest.approx((1.0 - 1.22, 1.0 + 1.22))
        assert ci.to_dict()["bracket"] == {"u": 0.0, "v": 2.0}
        assert ci.x0 is None

    def test_mode_interval_clamped_to_domain(self, builtin_table: CriticalValueTable) -> None:
        """Test intersection with the design range."""
        ci = ci_mode(ModeBracket(1.0, 0.0, 2.0), 0.05, builtin_table, domain=(0.0, 3.0))
        assert ci.lower == 0.0
        assert ci.upper == pytest.approx(2.22)
        assert ci.clamped

    def test_degenerate_bracket(self, builtin_table: CriticalValueTable) -> None:
        """Test that a zero-width bracket is degenerate geometry."""
        with pytest.raises(DegenerateGeometryError, match="collapsed"):
            ci_mode(ModeBracket(1.0, 1.0, 1.0), 0.05, builtin_table)


class TestGenericInterval:
    """Tests for ci_generic."""

    def test_matches_model_specific_intervals(
        self,
        wide_fit: PiecewiseLinearFunction,
        wide_piece: LinearPiece,
        builtin_table: CriticalValueTable,
    ) -> None:
        """Test that supplied point estimates reproduce ci_value and ci_derivative."""
        scale = NuisanceScale(0.7)
        estimates = wide_fit.point_estimates(2.0, wide_piece)
        value, derivative = ci_generic(estimates, wide_piece, 2.0, 25, scale, 0.05, builtin_table)
        assert value == ci_value(wide_fit, wide_piece, 2.0, 25, scale, 0.05, builtin_table)
        assert derivative == ci_derivative(
            wide_fit, wide_piece, 2.0, 25, scale, 0.05, builtin_table
        )

    def test_domain_applies_to_value_only(
        self, wide_piece: LinearPiece, builtin_table: CriticalValueTable
    ) -> None:
        """Test that the derivative interval is never clamped."""
        value, derivative = ci_generic(
            (0.01, -0.5), wide_piece, 2.0, 4, NuisanceScale(1.0), 0.05, builtin_table, NONNEGATIVE
        )
        assert value.lower == 0.0
        assert derivative.lower < 0.0
        assert not derivative.clamped


class TestNuisanceScales:
    """Tests for the per-model scale estimates."""

    def test_estimate_sigma(self) -> None:
        """Test the first-difference estimator on alternating responses."""
        data = RegressionData(x=[0.0, 1.0, 2.0, 3.0], y=[0.0, 1.0, 0.0, 1.0])
        assert estimate_sigma(data) == pytest.approx(math.sqrt(0.5))

    def test_estimate_sigma_noise(self, rng: np.random.Generator) -> None:
        """Test that sigma is recovered from a smooth signal plus noise."""
        x = np.arange(1, 2001) / 2000
        data = RegressionData(x, x**2 + 0.3 * rng.standard_normal(2000))
        assert estimate_sigma(data) == pytest.approx(0.3, rel=0.05)

    def test_local_design_density(self) -> None:
        """Test the count of design points inside the piece."""
        piece = LinearPiece(u_hat=2.0, v_hat=5.0, slope=0.0, intercept=0.0)
        assert local_design_density(np.arange(10.0), piece) == pytest.approx(4.0 / 30.0)

    def test_random_design_scale(self) -> None:
        """Test sigma / sqrt(pi_hat)."""
        data = RegressionData(x=np.arange(10.0), y=np.zeros(10))
        piece = LinearPiece(u_hat=2.0, v_hat=5.0, slope=0.0, intercept=0.0)
        scale = nuisance_a_random_design(data, piece, sigma_hat=2.0)
        assert scale.a_hat == pytest.approx(2.0 / math.sqrt(4.0 / 30.0))
        assert scale.source == "random-design"

    def test_random_design_without_points(self) -> None:
        """Test that an empty piece leaves the scale unavailable."""
        data = RegressionData(x=[0.0, 10.0], y=[0.0, 0.0])
        piece = LinearPiece(u_hat=2.0, v_hat=5.0, slope=0.0, intercept=0.0)
        with pytest.raises(MissingNuisanceError):
            nuisance_a_random_design(data, piece, sigma_hat=1.0)

    def test_logconcave_scale(self) -> None:
        """Test sqrt(f_hat(x0)) for the log-concave MLE."""
        fit = fit_log_concave_mle(SampleData([0.0, 4.0]))
        assert nuisance_logconcave(fit, 1.0).a_hat == pytest.approx(0.5)
        with pytest.raises(OutOfRangeError):
            nuisance_logconcave(fit, 5.0)

    def test_hazard_scale(self) -> None:
        """Test sqrt(h / (1 - F_n))."""
        assert nuisance_hazard(0.5, 0.75).a_hat == pytest.approx(math.sqrt(2.0))
        with pytest.raises(InvalidInputError):
            nuisance_hazard(0.5, 1.0)

    def test_deconvolution_scale(self) -> None:
        """Test sqrt(g) / k(0)."""
        assert nuisance_deconvolution(4.0, 2.0).a_hat == pytest.approx(1.0)
        with pytest.raises(InvalidInputError):
            nuisance_deconvolution(4.0, 0.0)

    @pytest.mark.parametrize("a_hat", [-1.0, math.nan, math.inf])
    def test_invalid_scale(self, a_hat: float) -> None:
        """Test that a scale must be finite and nonnegative."""
        with pytest.raises(InvalidInputError):
            NuisanceScale(a_hat)
