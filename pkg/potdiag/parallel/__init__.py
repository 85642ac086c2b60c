"""Pools for evaluating independent replications, windows and grid cells in parallel."""
from typing import Any, Callable

from potdiag.parallel.async_pool import AsyncTaskPool
from potdiag.parallel.sync_pool import SyncTaskPool
from potdiag.parallel.task_pool import TaskPool

__all__ = ["AsyncTaskPool", "SyncTaskPool", "TaskPool", "make_pool"]


def make_pool(fn: Callable[[Any], Any], workers: int = 1) -> TaskPool:
    """Create a pool evaluating ``fn``, serial for ``workers <= 1`` and multiprocess otherwise.

    Example::

        >>> from potdiag.parallel import make_pool
        >>> with make_pool(str, workers=1) as pool:
        ...     pool.map([1, 2])
        ['1', '2']

    Args:
        fn: Task function
        workers: Number of worker processes

    Returns:
        The task pool.
    """
    return AsyncTaskPool(fn, num_workers=workers) if workers > 1 else SyncTaskPool(fn)
