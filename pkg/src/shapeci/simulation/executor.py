"""Bounded process pool with a deterministic merge.

Tasks are plain picklable values handed to a module-level worker function.
Results come back in task order regardless of completion order, so any
aggregation downstream is independent of the worker count.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Type alias for progress callback
ProgressCallback = Callable[[int, str], None]  # (completed, message)

_CHUNKS_PER_WORKER = 16


def _run_chunk(worker: Callable[[T], R], chunk: Sequence[T]) -> list[R]:
    return [worker(task) for task in chunk]


def run_ordered(
    worker: Callable[[T], R],
    tasks: Sequence[T],
    workers: int = 1,
    progress_callback: ProgressCallback | None = None,
) -> list[R]:
    """
    Apply ``worker`` to every task, in parallel when ``workers > 1``.

    Args:
        worker: Module-level (picklable) function of one task
        tasks: Task values
        workers: Pool size; 1 runs inline in this process
        progress_callback: Optional callback called with (completed, message)

    Returns:
        Results in the order of ``tasks``
    """
    total = len(tasks)
    if workers <= 1 or total <= 1:
        results: list[R] = []
        for task in tasks:
            results.append(worker(task))
            if progress_callback:
                progress_callback(len(results), f"{len(results)}/{total}")
        return results

    size = max(1, total // (workers * _CHUNKS_PER_WORKER))
    starts = list(range(0, total, size))
    slots: list[list[R] | None] = [None] * len(starts)
    completed = 0
    logger.debug("Dispatching %d tasks to %d workers in %d chunks", total, workers, len(starts))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {
            executor.submit(_run_chunk, worker, tasks[start : start + size]): i
            for i, start in enumerate(starts)
        }
        for future in as_completed(futures):
            chunk_results = future.result()
            slots[futures[future]] = chunk_results
            completed += len(chunk_results)
            if progress_callback:
                progress_callback(completed, f"{completed}/{total}")

    return [result for chunk in slots if chunk is not None for result in chunk]
