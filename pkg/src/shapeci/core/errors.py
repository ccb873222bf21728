"""Exception hierarchy shared by estimators, inference and simulations.

Each exception class carries the process exit code the CLI maps it to, so
library code never needs to know about the command-line surface.
"""

from typing import Any


class ShapeCIError(Exception):
    """Base exception for shapeci errors."""

    exit_code: int = 1

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        """
        Initialize the error.

        Args:
            message: Human-readable error message
            details: Optional structured context (iteration counts, indices, ...)
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}


class InvalidInputError(ShapeCIError, ValueError):
    """Raised when data, a fit file or a configuration is malformed."""

    exit_code = 2


class ConvergenceError(ShapeCIError):
    """Raised when an iterative solver stops before meeting its tolerance."""

    exit_code = 3

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message, {"iterations": iterations, "residual": residual})
        self.iterations = iterations
        self.residual = residual

    def __str__(self) -> str:
        return f"{self.message} (iterations={self.iterations}, residual={self.residual:.3e})"


class ReplicationError(ShapeCIError):
    """Raised when one Monte Carlo replication fails."""

    exit_code = 3

    def __init__(self, message: str, index: int, cause: str | None = None):
        super().__init__(message, {"replication_index": index, "cause": cause})
        self.index = index

    def __str__(self) -> str:
        return f"replication {self.index}: {self.message}"


class CoverageInvalidError(ShapeCIError):
    """Raised when too many coverage replications failed for the report to stand."""

    exit_code = 3

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class InvariantViolationError(ShapeCIError):
    """Raised when a spot-checked confidence interval breaks nesting or symmetry."""

    exit_code = 3


class CharacterizationError(InvariantViolationError):
    """Raised when a fit fails the optimality characterization of its estimator."""

    def __init__(self, message: str, report: dict[str, Any]):
        super().__init__(message, report)
        self.report = report


class OutOfRangeError(ShapeCIError, ValueError):
    """Raised when a point lies outside the range where a fit is defined."""

    exit_code = 4


class DegenerateGeometryError(ShapeCIError, ValueError):
    """Raised when a linear piece or mode bracket has zero width."""

    exit_code = 4


class MissingStatisticError(ShapeCIError, LookupError):
    """Raised when a critical-value table cannot supply a requested quantile."""

    exit_code = 5

    def __str__(self) -> str:
        return self.message


class MissingNuisanceError(ShapeCIError):
    """Raised when a scale-dependent interval is requested without any sigma source."""

    exit_code = 5
