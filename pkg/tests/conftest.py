"""Pytest configuration and shared fixtures."""

import os
from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest

from shapeci.core.data import RegressionData, SampleData
from shapeci.inference.tables import CriticalValueTable

RUN_SLOW = os.environ.get("SHAPECI_RUN_SLOW") == "1"


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    """Skip desk-scale Monte Carlo runs unless SHAPECI_RUN_SLOW=1."""
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set SHAPECI_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def clean_env() -> Generator[None, None, None]:
    """Clean environment variables before and after test."""
    original_env = os.environ.copy()

    for key in list(os.environ.keys()):
        if key.startswith("SHAPECI_"):
            del os.environ[key]

    yield

    os.environ.clear()
    os.environ.update(original_env)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test data."""
    return np.random.default_rng(20240101)


@pytest.fixture
def quadratic_data(rng: np.random.Generator) -> RegressionData:
    """n = 200 noisy observations of 12 (x - 0.5)^2 on the grid i/n."""
    n = 200
    x = np.arange(1, n + 1) / n
    y = 12.0 * (x - 0.5) ** 2 + 0.1 * rng.standard_normal(n)
    return RegressionData(x, y)


@pytest.fixture
def six_point_data() -> RegressionData:
    """Small hand-checkable regression data set."""
    return RegressionData(
        np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        np.array([4.0, 1.0, 2.0, 0.0, 3.0, 5.0]),
    )


@pytest.fixture
def beta_sample(rng: np.random.Generator) -> SampleData:
    """n = 300 draws from Beta(2, 3)."""
    return SampleData(rng.beta(2.0, 3.0, size=300))


@pytest.fixture
def exponential_sample(rng: np.random.Generator) -> SampleData:
    """n = 200 draws from Exp(1)."""
    return SampleData(rng.exponential(1.0, size=200))


@pytest.fixture
def builtin_table() -> CriticalValueTable:
    """The tabulated critical values shipped with the package."""
    return CriticalValueTable.builtin()


@pytest.fixture
def regression_csv(tmp_path: Path, quadratic_data: RegressionData) -> Path:
    """CSV file with header x,y."""
    path = tmp_path / "regression.csv"
    rows = "\n".join(f"{float(x)!r},{float(y)!r}" for x, y in zip(quadratic_data.x, quadratic_data.y))
    path.write_text("x,y\n" + rows + "\n", encoding="utf-8")
    return path


@pytest.fixture
def sample_csv(tmp_path: Path, beta_sample: SampleData) -> Path:
    """CSV file with header x."""
    path = tmp_path / "sample.csv"
    path.write_text("x\n" + "\n".join(repr(float(v)) for v in beta_sample.obs) + "\n", encoding="utf-8")
    return path
