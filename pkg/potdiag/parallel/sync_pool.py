"""A task pool evaluating its tasks serially in the calling process."""
from typing import Any, Callable, List, Sequence

from potdiag import logger
from potdiag.parallel.task_pool import TaskPool

__all__ = ["SyncTaskPool"]


class SyncTaskPool(TaskPool):
    """Task pool that serially runs every task in the current process.

    Example::

        >>> from potdiag.parallel import SyncTaskPool
        >>> with SyncTaskPool(lambda x: x * x) as pool:
        ...     pool.map([1, 2, 3])
        [1, 4, 9]
    """

    def __init__(self, fn: Callable[[Any], Any]):
        super().__init__(fn, num_workers=1)

    def map(self, tasks: Sequence[Any], label: str = "tasks") -> List[Any]:
        results = []
        for done, task in enumerate(tasks, start=1):
            results.append(self.fn(task))
            logger.progress(label, done, len(tasks))
        return results
