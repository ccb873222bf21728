"""Run manifests written next to every CLI output."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any

import pendulum

from .. import __version__

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"

_TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic")


def config_fingerprint(config: dict[str, Any]) -> str:
    """SHA-256 over the canonical JSON form of a resolved configuration."""
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def collect_versions() -> dict[str, str]:
    versions = {"shapeci": __version__, "python": platform.python_version()}
    for name in _TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def manifest_path(output: Path) -> Path:
    """``<output>.manifest.json`` beside the output file."""
    return output.with_name(output.name + MANIFEST_SUFFIX)


def stdout_manifest_path(command: str, directory: Path | None = None) -> Path:
    """Manifest location for a command that printed its result to stdout."""
    return (directory or Path.cwd()) / f"shapeci-{command}{MANIFEST_SUFFIX}"


@dataclass
class RunManifest:
    """
    Everything needed to reproduce one CLI invocation.

    Attributes:
        command: Subcommand name (fit, ci, simulate-critical-values, coverage)
        config: Fully resolved configuration
        seed: Master seed, or None for deterministic commands
        argv: Raw command line
        table_source: "builtin" or the path of the critical-value table used
        outputs: Paths written by the command
        metrics: Metrics summary of the run
    """

    command: str
    config: dict[str, Any]
    seed: int | None = None
    argv: list[str] = field(default_factory=lambda: list(sys.argv[1:]))
    table_source: str | None = None
    outputs: list[str] = field(default_factory=list)
    metrics: dict[str, Any] = field(default_factory=dict)
    versions: dict[str, str] = field(default_factory=collect_versions)
    started_at: str = field(default_factory=lambda: pendulum.now("UTC").to_iso8601_string())
    wall_seconds: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.config)

    def add_output(self, path: Path) -> None:
        self.outputs.append(str(path))

    def finish(self) -> RunManifest:
        """Stamp the elapsed wall time."""
        self.wall_seconds = time.perf_counter() - self._t0
        return self

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload.pop("_t0")
        payload["config_sha256"] = self.fingerprint
        return payload

    def write(self, path: Path) -> Path:
        """
        Write the manifest as JSON.

        Args:
            path: Destination; usually ``manifest_path(output)``

        Returns:
            The path written
        """
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, default=str) + "\n", encoding="utf-8")
        logger.info("Manifest written to %s", path)
        return path
