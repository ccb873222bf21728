"""Configuration settings for shapeci using Pydantic Settings."""

import os
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .validation import validate_workers


class ShapeCISettings(BaseSettings):
    """Process-wide defaults for solvers, simulations and the CLI."""

    model_config = SettingsConfigDict(
        env_prefix="SHAPECI_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # === Parallelism ===
    workers: int = Field(
        default=1,
        description="Default worker-process count for simulations (--workers overrides)",
        ge=1,
        le=512,
    )

    # === Solver Tolerances ===
    max_iterations: int = Field(
        default=10_000,
        description="Maximum outer iterations of the support-reduction / active-set solvers",
        gt=0,
    )

    char_rtol: float = Field(
        default=1e-10,
        description="Characterization tolerance relative to the data scale",
        gt=0,
        lt=1e-2,
    )

    kink_rtol: float = Field(
        default=1e-8,
        description="Slope change (relative to max slope + 1) above which a knot is a kink",
        gt=0,
        lt=1e-2,
    )

    grad_tol: float = Field(
        default=1e-11,
        description="Gradient sup-norm, per unit of total weight, at which Newton steps stop",
        gt=0,
    )

    # === Simulation ===
    default_seed: int = Field(
        default=20240101,
        description="Master seed used when a command does not receive --seed",
        ge=0,
    )

    table_path: Path | None = Field(
        default=None,
        description="Critical-value table JSON used when --table is omitted (builtin if unset)",
    )

    progress: bool = Field(
        default=True,
        description="Render progress bars on stderr for long runs",
    )

    # === Logging Configuration ===
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="WARNING",
        description="Application log level",
    )

    log_file: Path | None = Field(
        default=None,
        description="Optional log file path",
    )

    @field_validator("table_path", "log_file")
    @classmethod
    def expand_path(cls, v: Path | None) -> Path | None:
        """Expand user home directory in paths."""
        if v is None:
            return None
        return Path(os.path.expanduser(str(v)))

    def resolve_workers(self, requested: int | None) -> int:
        """Return the worker count to use, preferring an explicit request."""
        workers = self.workers if requested is None else requested
        if not validate_workers(workers):
            raise ValueError(f"Worker count must be between 1 and 512, got {workers}")
        return workers


# Global settings instance
_settings: ShapeCISettings | None = None


def get_settings() -> ShapeCISettings:
    """Get or create the global settings instance."""
    global _settings
    if _settings is None:
        _settings = ShapeCISettings()
    return _settings


def reload_settings() -> ShapeCISettings:
    """Reload settings from environment (useful for testing)."""
    global _settings
    _settings = ShapeCISettings()
    return _settings
