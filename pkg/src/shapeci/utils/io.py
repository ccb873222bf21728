"""CSV ingestion, fit files and full-precision JSON output."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, TextIO

import numpy as np
import pandas as pd

from ..core.data import RegressionData, SampleData
from ..core.errors import InvalidInputError
from ..core.piecewise import PiecewiseLinearFunction
from ..estimators.log_concave import LogConcaveFit
from ..inference.pivotal_ci import PointEstimator

logger = logging.getLogger(__name__)

FitModel = Literal["convex-regression", "log-concave", "convex-density"]
FIT_MODELS: tuple[str, ...] = ("convex-regression", "log-concave", "convex-density")


def _read_columns(path: Path, columns: list[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, encoding="utf-8", skipinitialspace=True)
    except FileNotFoundError as e:
        raise InvalidInputError(f"Input file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InvalidInputError(f"Malformed CSV {path}: {e}") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    if list(frame.columns) != columns:
        raise InvalidInputError(
            f"{path} must have the header {','.join(columns)}, got {','.join(frame.columns)}"
        )
    try:
        return frame.apply(pd.to_numeric, errors="raise").astype(np.float64)
    except (ValueError, TypeError) as e:
        raise InvalidInputError(f"{path} contains a non-numeric entry: {e}") from e


def read_regression_csv(path: Path) -> RegressionData:
    """
    Read a regression CSV with header ``x,y``.

    Rows are sorted by x; repeated design points are rejected.

    Raises:
        InvalidInputError: On a missing file, wrong header, non-numeric or too few rows
    """
    frame = _read_columns(path, ["x", "y"]).sort_values("x", kind="stable")
    logger.debug("Read %d regression pairs from %s", len(frame), path)
    return RegressionData(frame["x"].to_numpy(), frame["y"].to_numpy())


def read_sample_csv(path: Path) -> SampleData:
    """Read a density sample CSV with header ``x``."""
    frame = _read_columns(path, ["x"])
    logger.debug("Read %d observations from %s", len(frame), path)
    return SampleData(frame["x"].to_numpy())


def _json_safe(value: Any) -> Any:
    # NaN and infinities are not JSON; they are written as null.
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, np.floating):
        return _json_safe(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_json_safe(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_json(payload: Any) -> str:
    """JSON text with round-trip float precision (Python's shortest repr)."""
    return json.dumps(_json_safe(payload), indent=2, allow_nan=False)


def write_json(payload: Any, path: Path | None = None, stream: TextIO | None = None) -> None:
    """Write ``payload`` to ``path``, or to ``stream`` when no path is given."""
    text = dumps_json(payload) + "\n"
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    elif stream is not None:
        stream.write(text)
        stream.flush()
    else:
        raise ValueError("write_json needs a path or a stream")


@dataclass(frozen=True, eq=False)
class FitFile:
    """A fitted estimator read back from disk.

    Attributes:
        model: Model the fit belongs to
        function: Fitted function (the log-density for log-concave fits)
        n: Sample size
        data: Original regression pairs, when recorded
    """

    model: FitModel
    function: PiecewiseLinearFunction
    n: int
    data: RegressionData | None = None

    @property
    def log_concave(self) -> LogConcaveFit:
        if self.model != "log-concave":
            raise InvalidInputError(f"Fit file holds a {self.model} fit, not a log-concave one")
        meta = {k: v for k, v in self.function.meta.items() if k != "n"}
        return LogConcaveFit(phi=self.function, n=self.n, meta=meta)

    @property
    def estimator(self) -> PointEstimator:
        """Object whose ``point_estimates`` give the value and slope at a point."""
        return self.log_concave if self.model == "log-concave" else self.function


def fit_payload(
    model: FitModel,
    fit: PiecewiseLinearFunction | LogConcaveFit,
    data: RegressionData | SampleData,
) -> dict[str, Any]:
    """
    Fit file contents ``{model, knots, values, shape, meta}``.

    Regression fits also record the design and the responses in ``meta`` so that
    sigma and the design density can be estimated from the fit file alone.
    """
    payload: dict[str, Any] = {"model": model, **fit.to_dict()}
    meta = dict(payload.get("meta", {}))
    meta["n"] = data.n
    if isinstance(data, RegressionData):
        meta["x"] = data.x.tolist()
        meta["y"] = data.y.tolist()
    payload["meta"] = meta
    return payload


def save_fit(
    path: Path,
    model: FitModel,
    fit: PiecewiseLinearFunction | LogConcaveFit,
    data: RegressionData | SampleData,
) -> None:
    """Write the fit file of :func:`fit_payload` to ``path``."""
    payload = fit_payload(model, fit, data)
    write_json(payload, path)
    logger.info("Wrote %s fit with %d knots to %s", model, len(payload["knots"]), path)


def load_fit(path: Path) -> FitFile:
    """
    Read a fit file written by :func:`save_fit`.

    Raises:
        InvalidInputError: If the file is missing, not JSON, or not a valid fit
    """
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InvalidInputError(f"Fit file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"Fit file {path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise InvalidInputError(f"Fit file {path} must hold a JSON object")

    model = payload.get("model")
    if model not in FIT_MODELS:
        raise InvalidInputError(f"Unknown model {model!r} in {path}; expected one of {FIT_MODELS}")

    function = PiecewiseLinearFunction.from_dict(payload)
    meta = function.meta
    try:
        n = int(meta["n"])
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"Fit file {path} must record the sample size in meta.n") from e

    data = None
    if "x" in meta and "y" in meta:
        data = RegressionData(np.asarray(meta["x"]), np.asarray(meta["y"]))
    return FitFile(model=model, function=function, n=n, data=data)
