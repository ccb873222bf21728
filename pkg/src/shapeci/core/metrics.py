"""Run metrics for simulations and coverage experiments.

Replications execute in worker processes and report plain numbers back; the
parent process feeds them into a :class:`MetricsCollector` whose summary ends up
in the run manifest (solver iteration counts, replication wall times, failures).
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class MetricType(Enum):
    """Types of metrics that can be collected."""

    COUNTER = "counter"
    HISTOGRAM = "histogram"


@dataclass(frozen=True)
class MetricEvent:
    """A single recorded value.

    Attributes:
        name: Metric name (e.g., "solver_iterations", "replication_seconds")
        type: Counter or histogram
        value: The recorded value
        labels: Labels for grouping (e.g., {"n": "1000", "target": "mode"})
    """

    name: str
    type: MetricType
    value: float
    labels: dict[str, str] = field(default_factory=dict)


def _matches(
    event: MetricEvent, name: str, kind: MetricType, labels: dict[str, str] | None
) -> bool:
    if event.type is not kind or event.name != name:
        return False
    if labels is None:
        return True
    return all(event.labels.get(k) == v for k, v in labels.items())


class MetricsCollector:
    """In-memory counters and histograms keyed by name and labels."""

    def __init__(self) -> None:
        self._events: list[MetricEvent] = []

    def increment(
        self, name: str, value: float = 1.0, labels: dict[str, str] | None = None
    ) -> None:
        """
        Add to a counter.

        Args:
            name: Counter name, e.g. "replication_failures"
            value: Amount to add (default: 1.0)
            labels: Optional labels, e.g. {"n": "500"}
        """
        self._events.append(MetricEvent(name, MetricType.COUNTER, value, labels or {}))

    def record_histogram(
        self, name: str, value: float, labels: dict[str, str] | None = None
    ) -> None:
        """
        Record one observation of a distribution, e.g. solver iterations of a fit.

        Args:
            name: Histogram name
            value: Observed value
            labels: Optional labels
        """
        self._events.append(MetricEvent(name, MetricType.HISTOGRAM, value, labels or {}))

    def get_events(self) -> list[MetricEvent]:
        return self._events.copy()

    def get_counter_value(self, name: str, labels: dict[str, str] | None = None) -> float:
        """Sum of all increments of a counter, optionally restricted to matching labels."""
        return sum(e.value for e in self._events if _matches(e, name, MetricType.COUNTER, labels))

    def get_histogram_values(self, name: str, labels: dict[str, str] | None = None) -> list[float]:
        """All values recorded for a histogram, in recording order."""
        return [e.value for e in self._events if _matches(e, name, MetricType.HISTOGRAM, labels)]

    def export_summary(self) -> dict[str, Any]:
        """
        Summarize counters (totals) and histograms (count, min, max, mean, median).

        Returns:
            JSON-serializable dictionary keyed by metric type and name
        """
        counters: dict[str, float] = {}
        series: dict[str, list[float]] = {}
        for event in self._events:
            if event.type is MetricType.COUNTER:
                counters[event.name] = counters.get(event.name, 0.0) + event.value
            else:
                series.setdefault(event.name, []).append(event.value)

        histograms: dict[str, dict[str, float]] = {}
        for name, values in series.items():
            arr = np.asarray(values, dtype=np.float64)
            histograms[name] = {
                "count": int(arr.size),
                "min": float(arr.min()),
                "max": float(arr.max()),
                "mean": float(arr.mean()),
                "median": float(np.median(arr)),
            }

        return {
            "counters": counters,
            "histograms": histograms,
            "total_events": len(self._events),
        }


class MetricsTimer:
    """Context manager recording the elapsed wall time of a block as a histogram.

    Example:
        with MetricsTimer(metrics, "simulation_seconds", {"n": "10000"}):
            samples = simulate_lne_samples(config)
    """

    def __init__(
        self, collector: MetricsCollector, metric_name: str, labels: dict[str, str] | None = None
    ):
        self.collector = collector
        self.metric_name = metric_name
        self.labels = labels or {}
        self.start_time: float | None = None
        self.elapsed: float | None = None

    def __enter__(self) -> "MetricsTimer":
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self.start_time is not None:
            self.elapsed = time.perf_counter() - self.start_time
            self.collector.record_histogram(self.metric_name, self.elapsed, self.labels)
