"""Critical-value tables for the pivotal and oracle limit laws.

A table maps each :class:`Statistic` to either a sorted Monte Carlo sample
(simulated tables) or a grid of tabulated quantiles (the builtin table). The
critical value ``c_delta`` of a law T is its upper delta-quantile,
``P(T > c_delta) = delta``, so ``quantile(stat, delta)`` is the (1 - delta)
quantile of the stored distribution.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config.validation import validate_delta
from ..core.errors import InvalidInputError, MissingStatisticError


class Statistic(str, Enum):
    """Limit laws a table can carry."""

    L0 = "L0"
    L1 = "L1"
    M = "M"
    ABS_L0 = "absL0"
    ABS_L1 = "absL1"
    ABS_M = "absM"
    H2 = "H2"
    H3 = "H3"
    H2_MODE = "H2mode"
    ABS_H2 = "absH2"
    ABS_H3 = "absH3"
    ABS_H2_MODE = "absH2mode"

    @property
    def is_absolute(self) -> bool:
        return self.value.startswith("abs")

    @property
    def absolute(self) -> Statistic:
        """The absolute-value counterpart of a signed law (itself when already absolute)."""
        if self.is_absolute:
            return self
        return Statistic("abs" + self.value)


PIVOTAL_STATISTICS = (Statistic.L0, Statistic.L1, Statistic.M)
ORACLE_STATISTICS = (Statistic.H2, Statistic.H3, Statistic.H2_MODE)


@dataclass(frozen=True)
class TableMeta:
    """Provenance of a table.

    Attributes:
        B: Number of Monte Carlo replications
        n: Sample size of each replication
        f0: Truth specification the replications were drawn from
        seed: Master seed (None for tabulated values)
        source: "builtin" or "simulated"
    """

    B: int
    n: int
    f0: str
    seed: int | None = None
    source: str = "simulated"

    def __post_init__(self) -> None:
        if self.B < 1:
            raise InvalidInputError(f"Table meta needs B >= 1, got {self.B}")

    def to_dict(self) -> dict[str, Any]:
        return {"B": self.B, "n": self.n, "f0": self.f0, "seed": self.seed, "source": self.source}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TableMeta:
        try:
            return cls(
                B=int(data["B"]),
                n=int(data["n"]),
                f0=str(data["f0"]),
                seed=None if data.get("seed") is None else int(data["seed"]),
                source=str(data.get("source", "simulated")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"Malformed table meta: {e}") from e


@dataclass(frozen=True)
class QuantileGrid:
    """Tabulated critical values, linearly interpolated in delta."""

    deltas: NDArray[np.float64]
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        deltas = np.asarray(self.deltas, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if deltas.shape != values.shape or deltas.ndim != 1 or deltas.size < 2:
            raise InvalidInputError("A quantile grid needs matching 1-d deltas and values")
        order = np.argsort(deltas)
        deltas, values = deltas[order], values[order]
        if np.any(np.diff(deltas) <= 0):
            raise InvalidInputError("Quantile grid deltas must be distinct")
        if np.any(np.diff(values) > 0):
            raise InvalidInputError("Critical values must be nonincreasing in delta")
        deltas.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "values", values)

    def quantile(self, delta: float) -> float:
        if not self.deltas[0] <= delta <= self.deltas[-1]:
            raise MissingStatisticError(
                f"delta={delta} lies outside the tabulated range "
                f"[{self.deltas[0]}, {self.deltas[-1]}]; simulate a table with limit_sim"
            )
        return float(np.interp(delta, self.deltas, self.values))

    def to_dict(self) -> dict[str, list[float]]:
        return {"delta": self.deltas.tolist(), "value": self.values.tolist()}


def _sorted_sample(name: str, sample: ArrayLike) -> NDArray[np.float64]:
    array = np.sort(np.asarray(sample, dtype=np.float64).ravel())
    if array.size < 1:
        raise InvalidInputError(f"Statistic {name} has an empty sample")
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"Statistic {name} has non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CriticalValueTable:
    """Immutable collection of limit-law samples and tabulated quantiles.

    Attributes:
        samples: Sorted Monte Carlo sample per statistic
        grids: Tabulated quantiles per statistic (used when no sample is stored)
        meta: Provenance
    """

    samples: Mapping[Statistic, NDArray[np.float64]]
    meta: TableMeta
    grids: Mapping[Statistic, QuantileGrid] = field(default_factory=dict)

    def __post_init__(self) -> None:
        samples = {Statistic(k): _sorted_sample(str(k), v) for k, v in self.samples.items()}
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "grids", {Statistic(k): v for k, v in self.grids.items()})

    @property
    def statistics(self) -> list[Statistic]:
        return sorted(set(self.samples) | set(self.grids), key=lambda s: s.value)

    def has(self, statistic: Statistic | str) -> bool:
        stat = Statistic(statistic)
        return stat in self.samples or stat in self.grids

    def sample(self, statistic: Statistic | str) -> NDArray[np.float64]:
        """Sorted Monte Carlo sample of a statistic."""
        stat = Statistic(statistic)
        if stat not in self.samples:
            raise MissingStatisticError(f"Table holds no sample for statistic {stat.value}")
        return self.samples[stat]

    def quantile(self, statistic: Statistic | str, delta: float) -> float:
        """
        Critical value c_delta of a statistic.

        Stored samples use the inverted-ECDF (left-continuous) quantile at 1 - delta;
        tabulated statistics interpolate linearly in delta.

        Args:
            statistic: Statistic name
            delta: Upper-tail probability in (0, 1)

        Raises:
            MissingStatisticError: If the table lacks the statistic or the delta level
        """
        try:
            validate_delta(delta)
        except ValueError as e:
            raise InvalidInputError(str(e)) from e
        stat = Statistic(statistic)
        if stat in self.samples:
            return float(np.quantile(self.samples[stat], 1.0 - delta, method="inverted_cdf"))
        if stat in self.grids:
            return self.grids[stat].quantile(delta)
        raise MissingStatisticError(
            f"Critical-value table ({self.meta.source}) lacks statistic {stat.value}; "
            f"available: {', '.join(s.value for s in self.statistics) or 'none'}"
        )

    def with_fallback(self, fallback: CriticalValueTable) -> CriticalValueTable:
        """Table whose own statistics take precedence over those of ``fallback``."""
        samples = {**fallback.samples, **self.samples}
        grids = {k: v for k, v in {**fallback.grids, **self.grids}.items() if k not in samples}
        return CriticalValueTable(samples=samples, grids=grids, meta=self.meta)

    def to_json(self) -> dict[str, Any]:
        payload: dict[str, Any] = {s.value: self.samples[s].tolist() for s in self.samples}
        if self.grids:
            payload["grids"] = {s.value: g.to_dict() for s, g in self.grids.items()}
        payload["meta"] = self.meta.to_dict()
        return payload

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> CriticalValueTable:
        if "meta" not in data:
            raise InvalidInputError("Critical-value table JSON lacks a meta object")
        meta = TableMeta.from_dict(data["meta"])
        samples: dict[Statistic, Any] = {}
        grids: dict[Statistic, QuantileGrid] = {}
        try:
            for key, value in data.items():
                if key == "meta":
                    continue
                if key == "grids":
                    for stat, grid in value.items():
                        grids[Statistic(stat)] = QuantileGrid(
                            deltas=np.asarray(grid["delta"]), values=np.asarray(grid["value"])
                        )
                    continue
                samples[Statistic(key)] = value
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidInputError):
                raise
            raise InvalidInputError(f"Malformed critical-value table: {e}") from e
        return cls(samples=samples, grids=grids, meta=meta)

    def save(self, path: Path) -> None:
        # repr-based float formatting in json round-trips exactly
        path.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> CriticalValueTable:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidInputError(f"Cannot read critical-value table {path}: {e}") from e
        return cls.from_json(data)

    @classmethod
    def builtin(cls) -> CriticalValueTable:
        """Tabulated quantiles of the pivotal and oracle laws (B = 10^6, n = 10^5)."""
        return _BUILTIN


_ABS_DELTAS = [1.0, 0.50, 0.20, 0.10, 0.05, 0.02, 0.01]
_SIGNED_DELTAS = [0.990, 0.975, 0.950, 0.900, 0.500, 0.100, 0.050, 0.025, 0.010]

# Absolute laws are anchored at delta = 1 with value 0 (the 0-quantile of |T|).
_BUILTIN_GRIDS = {
    Statistic.ABS_L0: [0.0, 0.65, 1.30, 1.73, 2.13, 2.63, 2.99],
    Statistic.ABS_L1: [0.0, 1.73, 4.55, 6.78, 9.00, 11.89, 14.02],
    Statistic.ABS_M: [0.0, 0.19, 0.35, 0.47, 0.61, 0.86, 1.13],
    Statistic.ABS_H2: [0.0, 0.89, 1.68, 2.16, 2.58, 3.08, 3.44],
    Statistic.ABS_H3: [0.0, 4.28, 7.79, 9.66, 11.14, 12.72, 13.70],
    Statistic.ABS_H2_MODE: [0.0, 0.18, 0.32, 0.40, 0.46, 0.53, 0.57],
}
_BUILTIN_SIGNED = {
    Statistic.L0: [-2.59, -2.03, -1.61, -1.19, 0.04, 1.39, 1.82, 2.20, 2.66],
    Statistic.L1: [-11.87, -9.00, -6.78, -4.55, 0.00, 4.54, 6.77, 9.00, 11.91],
    Statistic.M: [-0.86, -0.61, -0.48, -0.35, 0.00, 0.35, 0.47, 0.61, 0.86],
}

_BUILTIN = CriticalValueTable(
    samples={},
    grids={
        **{s: QuantileGrid(np.array(_ABS_DELTAS), np.array(v)) for s, v in _BUILTIN_GRIDS.items()},
        **{
            s: QuantileGrid(np.array(_SIGNED_DELTAS), np.array(v))
            for s, v in _BUILTIN_SIGNED.items()
        },
    },
    meta=TableMeta(B=1_000_000, n=100_000, f0="12*(x-0.5)^2", seed=None, source="builtin"),
)
