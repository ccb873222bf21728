"""Configuration management for shapeci."""

from .settings import ShapeCISettings, get_settings, reload_settings
from .validation import (
    validate_delta,
    validate_level,
    validate_n_grid,
    validate_workers,
)

__all__ = [
    "ShapeCISettings",
    "get_settings",
    "reload_settings",
    "validate_delta",
    "validate_level",
    "validate_n_grid",
    "validate_workers",
]
