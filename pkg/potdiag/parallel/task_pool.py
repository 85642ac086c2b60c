"""Base class for pools evaluating one function over many independent tasks."""
from typing import Any, Callable, List, Sequence

__all__ = ["TaskPool"]


class TaskPool:
    """Evaluates a fixed task function over a sequence of independent tasks.

    Tasks are plain picklable values (a replicate seed, a window of a series); results come
    back in task order whatever order the workers finish in, so aggregation never depends on
    scheduling.
    """

    def __init__(self, fn: Callable[[Any], Any], num_workers: int):
        self.fn = fn
        self.num_workers = num_workers
        self.closed = False

    def map(self, tasks: Sequence[Any], label: str = "tasks") -> List[Any]:
        """Evaluates the task function on every task and returns the results in task order.

        Args:
            tasks: The task arguments
            label: Name of the computation used in progress messages
        """
        raise NotImplementedError()

    def close_extras(self, **kwargs):
        """Clean up the extra resources e.g. beyond what's in this base class."""
        pass

    def close(self, **kwargs):
        """Closes the pool, releasing its workers. Closing twice is a no-op."""
        if self.closed:
            return
        self.close_extras(**kwargs)
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()

    def __del__(self):
        if not getattr(self, "closed", True):
            self.close()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.num_workers})"
