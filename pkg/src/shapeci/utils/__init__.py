"""File ingestion and serialization helpers."""

from .io import (
    FIT_MODELS,
    FitFile,
    dumps_json,
    load_fit,
    read_regression_csv,
    read_sample_csv,
    save_fit,
    write_json,
)

__all__ = [
    "FIT_MODELS",
    "FitFile",
    "dumps_json",
    "load_fit",
    "read_regression_csv",
    "read_sample_csv",
    "save_fit",
    "write_json",
]
