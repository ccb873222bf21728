"""Validation functions for configuration values."""

from collections.abc import Sequence


def validate_level(level: float) -> bool:
    """
    Validate a confidence level 1 - delta.

    Args:
        level: Nominal coverage level

    Returns:
        True if valid

    Raises:
        ValueError: If the level is not strictly between 0 and 1
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"Confidence level must lie in (0, 1), got {level}")
    return True


def validate_delta(delta: float) -> bool:
    """
    Validate a tail probability delta.

    Args:
        delta: Tail probability used to look up critical values

    Returns:
        True if valid

    Raises:
        ValueError: If delta is not strictly between 0 and 1
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return True


def validate_n_grid(n_grid: Sequence[int], minimum: int = 2) -> bool:
    """
    Validate a grid of sample sizes.

    Args:
        n_grid: Sample sizes, in the order they will be run
        minimum: Smallest admissible sample size

    Returns:
        True if valid

    Raises:
        ValueError: If the grid is empty, unsorted, repeated or too small
    """
    if len(n_grid) == 0:
        raise ValueError("Sample-size grid cannot be empty")
    if any(n < minimum for n in n_grid):
        raise ValueError(f"Every sample size must be at least {minimum}, got {list(n_grid)}")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:], strict=False)):
        raise ValueError(f"Sample-size grid must be strictly ascending, got {list(n_grid)}")
    return True


def validate_workers(workers: int) -> bool:
    """
    Validate a worker-pool size.

    Args:
        workers: Number of worker processes

    Returns:
        True if valid, False otherwise
    """
    return 1 <= workers <= 512

