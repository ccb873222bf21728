"""Named truth functions for simulations and coverage experiments.

A truth is referenced by a spec string ``name`` or ``name:key=value,...`` (for
example ``quadratic:c=6,m=0.2``) and resolved through :class:`TruthRegistry`.
Specs, not truth objects, travel to worker processes.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from ..core.errors import InvalidInputError
from .streams import uniform_variates


class TruthKind(str, Enum):
    """Model a truth belongs to."""

    REGRESSION = "regression"
    LOG_CONCAVE = "log-concave"
    CONVEX_DENSITY = "convex-density"


class Truth(ABC):
    """
    Abstract base class for truth functions.

    Subclasses declare a registry ``name``, their ``kind`` and the default values
    of their parameters; any parameter may be overridden in the spec string.
    """

    name: ClassVar[str]
    kind: ClassVar[TruthKind]
    defaults: ClassVar[dict[str, float]] = {}

    def __init__(self, **params: float):
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise InvalidInputError(
                f"Unknown parameter(s) {sorted(unknown)} for truth '{self.name}'; "
                f"accepted: {sorted(self.defaults) or 'none'}"
            )
        self.params: dict[str, float] = {**self.defaults, **params}
        self._validate()

    def _validate(self) -> None:
        """Reject parameter values outside the family's shape class."""

    def __getattr__(self, item: str) -> float:
        params = self.__dict__.get("params", {})
        if item in params:
            return params[item]
        raise AttributeError(item)

    @property
    def spec(self) -> str:
        """Canonical spec string with every parameter spelled out."""
        if not self.params:
            return self.name
        body = ",".join(f"{k}={self.params[k]!r}" for k in sorted(self.params))
        return f"{self.name}:{body}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec!r})"

    @abstractmethod
    def value(self, x: ArrayLike) -> Any:
        """f0(x)."""

    @abstractmethod
    def first_derivative(self, x: ArrayLike) -> Any:
        """f0'(x)."""

    @abstractmethod
    def second_derivative(self, x: ArrayLike) -> Any:
        """f0''(x)."""

    @property
    @abstractmethod
    def mode(self) -> float:
        """Anti-mode for regression truths, mode for densities."""


class RegressionTruth(Truth):
    """Convex regression function on [0, 1]."""

    kind = TruthKind.REGRESSION


class DensityTruth(Truth):
    """Density given by a frozen scipy distribution and its log-derivatives."""

    kind = TruthKind.LOG_CONCAVE

    @property
    @abstractmethod
    def distribution(self) -> Any:
        """Frozen scipy.stats distribution."""

    @abstractmethod
    def log_derivative(self, x: ArrayLike) -> Any:
        """phi0'(x) with phi0 = log f0."""

    @abstractmethod
    def log_second_derivative(self, x: ArrayLike) -> Any:
        """phi0''(x)."""

    def value(self, x: ArrayLike) -> Any:
        return self.distribution.pdf(x)

    def first_derivative(self, x: ArrayLike) -> Any:
        return self.value(x) * self.log_derivative(x)

    def second_derivative(self, x: ArrayLike) -> Any:
        d1 = self.log_derivative(x)
        return self.value(x) * (self.log_second_derivative(x) + d1 * d1)

    def sample(self, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
        """n draws by inversion of the distribution function."""
        return np.asarray(self.distribution.ppf(uniform_variates(rng, n)), dtype=np.float64)


class ConvexDensityTruth(DensityTruth):
    """Convex nonincreasing density on [0, inf)."""

    kind = TruthKind.CONVEX_DENSITY

    @property
    def mode(self) -> float:
        return 0.0


class TruthRegistry:
    """
    Registry of truth families.

    Families register themselves with the :meth:`register` class decorator and are
    instantiated from spec strings with :meth:`create`.
    """

    _truths: dict[str, type[Truth]] = {}

    @classmethod
    def register(cls, truth_cls: type[Truth]) -> type[Truth]:
        """
        Register a truth family.

        Raises:
            ValueError: If a family with the same name is already registered
        """
        if truth_cls.name in cls._truths:
            raise ValueError(f"Truth '{truth_cls.name}' is already registered.")
        cls._truths[truth_cls.name] = truth_cls
        return truth_cls

    @classmethod
    def unregister(cls, name: str) -> None:
        cls._truths.pop(name, None)

    @classmethod
    def get(cls, name: str) -> type[Truth] | None:
        return cls._truths.get(name)

    @classmethod
    def names(cls, kind: TruthKind | None = None) -> list[str]:
        return sorted(n for n, t in cls._truths.items() if kind is None or t.kind is kind)

    @classmethod
    def create(cls, spec: str) -> Truth:
        """
        Instantiate a truth from ``name`` or ``name:key=value,...``.

        Raises:
            InvalidInputError: If the family is unknown or a parameter is malformed
        """
        name, params = parse_truth_spec(spec)
        truth_cls = cls.get(name)
        if truth_cls is None:
            raise InvalidInputError(
                f"Unknown truth '{name}'; available: {', '.join(cls.names())}"
            )
        return truth_cls(**params)


def parse_truth_spec(spec: str) -> tuple[str, dict[str, float]]:
    name, _, body = spec.strip().partition(":")
    if not name:
        raise InvalidInputError(f"Empty truth name in spec '{spec}'")
    params: dict[str, float] = {}
    for item in filter(None, (part.strip() for part in body.split(","))):
        key, sep, raw = item.partition("=")
        if not sep:
            raise InvalidInputError(f"Truth parameter '{item}' must look like key=value")
        try:
            params[key.strip()] = float(raw)
        except ValueError as e:
            raise InvalidInputError(
                f"Truth parameter '{key.strip()}' is not a number: {raw}"
            ) from e
    return name.strip(), params


# === Regression truths ===


@TruthRegistry.register
class Quadratic(RegressionTruth):
    """c (x - m)^2."""

    name = "quadratic"
    defaults = {"c": 12.0, "m": 0.5}

    def _validate(self) -> None:
        if self.c <= 0:
            raise InvalidInputError(f"quadratic needs c > 0, got {self.c}")

    def value(self, x: ArrayLike) -> Any:
        return self.c * (np.asarray(x) - self.m) ** 2

    def first_derivative(self, x: ArrayLike) -> Any:
        return 2.0 * self.c * (np.asarray(x) - self.m)

    def second_derivative(self, x: ArrayLike) -> Any:
        return 2.0 * self.c + 0.0 * np.asarray(x)

    @property
    def mode(self) -> float:
        return self.m


@TruthRegistry.register
class CircleArc(RegressionTruth):
    """a - a sqrt(1 - (x - m)^2), the lower arc of a stretched unit circle."""

    name = "circle"
    defaults = {"a": 20.0, "m": 0.5}

    def _validate(self) -> None:
        if self.a <= 0:
            raise InvalidInputError(f"circle needs a > 0, got {self.a}")
        if not 0.0 < self.m < 1.0:
            raise InvalidInputError(f"circle needs its centre m inside (0, 1), got {self.m}")

    def _root(self, x: ArrayLike) -> Any:
        return np.sqrt(1.0 - (np.asarray(x) - self.m) ** 2)

    def value(self, x: ArrayLike) -> Any:
        return self.a - self.a * self._root(x)

    def first_derivative(self, x: ArrayLike) -> Any:
        return self.a * (np.asarray(x) - self.m) / self._root(x)

    def second_derivative(self, x: ArrayLike) -> Any:
        return self.a / self._root(x) ** 3

    @property
    def mode(self) -> float:
        return self.m


@TruthRegistry.register
class Rational(RegressionTruth):
    """x + 2 / (x + 1)."""

    name = "rational"

    def value(self, x: ArrayLike) -> Any:
        xa = np.asarray(x)
        return xa + 2.0 / (xa + 1.0)

    def first_derivative(self, x: ArrayLike) -> Any:
        return 1.0 - 2.0 / (np.asarray(x) + 1.0) ** 2

    def second_derivative(self, x: ArrayLike) -> Any:
        return 4.0 / (np.asarray(x) + 1.0) ** 3

    @property
    def mode(self) -> float:
        return math.sqrt(2.0) - 1.0


# === Log-concave density truths ===


@TruthRegistry.register
class BetaTruth(DensityTruth):
    """Beta(a, b) with a, b >= 1."""

    name = "beta"
    defaults = {"a": 2.0, "b": 3.0}

    def _validate(self) -> None:
        if self.a < 1 or self.b < 1 or self.a + self.b <= 2:
            raise InvalidInputError(
                "beta is log-concave with a mode only for a, b >= 1 and a + b > 2"
            )

    @property
    def distribution(self) -> Any:
        return stats.beta(self.a, self.b)

    def log_derivative(self, x: ArrayLike) -> Any:
        xa = np.asarray(x)
        return (self.a - 1.0) / xa - (self.b - 1.0) / (1.0 - xa)

    def log_second_derivative(self, x: ArrayLike) -> Any:
        xa = np.asarray(x)
        return -(self.a - 1.0) / xa**2 - (self.b - 1.0) / (1.0 - xa) ** 2

    @property
    def mode(self) -> float:
        return (self.a - 1.0) / (self.a + self.b - 2.0)


@TruthRegistry.register
class ChiSquaredTruth(DensityTruth):
    """Chi-squared with k >= 2 degrees of freedom."""

    name = "chi2"
    defaults = {"k": 4.0}

    def _validate(self) -> None:
        if self.k < 2:
            raise InvalidInputError(f"chi2 is log-concave only for k >= 2, got {self.k}")

    @property
    def distribution(self) -> Any:
        return stats.chi2(self.k)

    def log_derivative(self, x: ArrayLike) -> Any:
        return (self.k / 2.0 - 1.0) / np.asarray(x) - 0.5

    def log_second_derivative(self, x: ArrayLike) -> Any:
        return -(self.k / 2.0 - 1.0) / np.asarray(x) ** 2

    @property
    def mode(self) -> float:
        return self.k - 2.0


@TruthRegistry.register
class GammaTruth(DensityTruth):
    """Gamma with shape >= 1 and a scale parameter."""

    name = "gamma"
    defaults = {"shape": 3.0, "scale": 1.0}

    def _validate(self) -> None:
        if self.shape < 1 or self.scale <= 0:
            raise InvalidInputError("gamma is log-concave only for shape >= 1 and scale > 0")

    @property
    def distribution(self) -> Any:
        return stats.gamma(self.shape, scale=self.scale)

    def log_derivative(self, x: ArrayLike) -> Any:
        return (self.shape - 1.0) / np.asarray(x) - 1.0 / self.scale

    def log_second_derivative(self, x: ArrayLike) -> Any:
        return -(self.shape - 1.0) / np.asarray(x) ** 2

    @property
    def mode(self) -> float:
        return (self.shape - 1.0) * self.scale


@TruthRegistry.register
class WeibullTruth(DensityTruth):
    """Weibull with shape >= 1."""

    name = "weibull"
    defaults = {"shape": 1.5, "scale": 1.0}

    def _validate(self) -> None:
        if self.shape < 1 or self.scale <= 0:
            raise InvalidInputError("weibull is log-concave only for shape >= 1 and scale > 0")

    @property
    def distribution(self) -> Any:
        return stats.weibull_min(self.shape, scale=self.scale)

    def log_derivative(self, x: ArrayLike) -> Any:
        z = np.asarray(x) / self.scale
        k = self.shape
        return (k - 1.0) / np.asarray(x) - (k / self.scale) * z ** (k - 1.0)

    def log_second_derivative(self, x: ArrayLike) -> Any:
        z = np.asarray(x) / self.scale
        k = self.shape
        return -(k - 1.0) / np.asarray(x) ** 2 - (k * (k - 1.0) / self.scale**2) * z ** (k - 2.0)

    @property
    def mode(self) -> float:
        k = self.shape
        return self.scale * ((k - 1.0) / k) ** (1.0 / k)


@TruthRegistry.register
class NormalTruth(DensityTruth):
    """Normal(mu, sd^2)."""

    name = "normal"
    defaults = {"mu": 0.0, "sd": 1.0}

    def _validate(self) -> None:
        if self.sd <= 0:
            raise InvalidInputError(f"normal needs sd > 0, got {self.sd}")

    @property
    def distribution(self) -> Any:
        return stats.norm(self.mu, self.sd)

    def log_derivative(self, x: ArrayLike) -> Any:
        return -(np.asarray(x) - self.mu) / self.sd**2

    def log_second_derivative(self, x: ArrayLike) -> Any:
        return -1.0 / self.sd**2 + 0.0 * np.asarray(x)

    @property
    def mode(self) -> float:
        return self.mu


# === Convex nonincreasing density truths ===


@TruthRegistry.register
class ExponentialTruth(ConvexDensityTruth):
    """Exponential with the given rate."""

    name = "exponential"
    defaults = {"rate": 1.0}

    def _validate(self) -> None:
        if self.rate <= 0:
            raise InvalidInputError(f"exponential needs rate > 0, got {self.rate}")

    @property
    def distribution(self) -> Any:
        return stats.expon(scale=1.0 / self.rate)

    def log_derivative(self, x: ArrayLike) -> Any:
        return -self.rate + 0.0 * np.asarray(x)

    def log_second_derivative(self, x: ArrayLike) -> Any:
        return 0.0 * np.asarray(x)


@TruthRegistry.register
class TriangularTruth(ConvexDensityTruth):
    """2 (1 - x)_+ on [0, 1]."""

    name = "triangular"

    @property
    def distribution(self) -> Any:
        return stats.triang(0.0)

    def log_derivative(self, x: ArrayLike) -> Any:
        return -1.0 / (1.0 - np.asarray(x))

    def log_second_derivative(self, x: ArrayLike) -> Any:
        return -1.0 / (1.0 - np.asarray(x)) ** 2
