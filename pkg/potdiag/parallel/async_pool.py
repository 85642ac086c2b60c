"""A task pool running its tasks in worker processes."""
import multiprocessing as mp
import sys
from multiprocessing.connection import wait
from typing import Any, Callable, Dict, List, Optional, Sequence

from potdiag import logger
from potdiag.parallel.task_pool import TaskPool
from potdiag.parallel.utils import CloudpickleWrapper, clear_mpi_env_vars

__all__ = ["AsyncTaskPool"]


class AsyncTaskPool(TaskPool):
    """Task pool that runs tasks in parallel worker processes.

    It uses ``multiprocessing`` processes, and pipes for communication. Every worker holds
    one task at a time; a worker that finishes is handed the next pending task.

    Example::

        >>> from potdiag.parallel import AsyncTaskPool
        >>> with AsyncTaskPool(abs, num_workers=2) as pool:
        ...     pool.map([-1, 2, -3])
        [1, 2, 3]
    """

    def __init__(
        self,
        fn: Callable[[Any], Any],
        num_workers: int,
        context: Optional[str] = None,
        daemon: bool = True,
    ):
        """Starts the worker processes.

        Args:
            fn: Task function, evaluated on one task at a time in a worker
            num_workers: Number of worker processes
            context: Context for `multiprocessing`. If ``None``, then the default context is used.
            daemon: If ``True``, then subprocesses quit with the head process.
        """
        super().__init__(fn, num_workers)
        ctx = mp.get_context(context)
        self.parent_pipes, self.processes = [], []
        self.error_queue = ctx.Queue()
        with clear_mpi_env_vars():
            for idx in range(num_workers):
                parent_pipe, child_pipe = ctx.Pipe()
                process = ctx.Process(
                    target=_worker,
                    name=f"Worker<{type(self).__name__}>-{idx}",
                    args=(
                        idx,
                        CloudpickleWrapper(fn),
                        child_pipe,
                        parent_pipe,
                        self.error_queue,
                    ),
                )

                self.parent_pipes.append(parent_pipe)
                self.processes.append(process)

                process.daemon = daemon
                process.start()
                child_pipe.close()

    def map(self, tasks: Sequence[Any], label: str = "tasks") -> List[Any]:
        self._assert_is_running()
        tasks = list(tasks)
        results: List[Any] = [None] * len(tasks)
        busy: Dict[Any, int] = {}
        next_task, done = 0, 0

        for worker, pipe in enumerate(self.parent_pipes):
            if next_task == len(tasks):
                break
            pipe.send(("run", (next_task, tasks[next_task])))
            busy[pipe] = worker
            next_task += 1

        while busy:
            for pipe in wait(list(busy)):
                worker = busy.pop(pipe)
                payload, success = pipe.recv()
                if not success:
                    self._raise_worker_error(worker)
                index, result = payload
                results[index] = result
                done += 1
                logger.progress(label, done, len(tasks))
                if next_task < len(tasks):
                    pipe.send(("run", (next_task, tasks[next_task])))
                    busy[pipe] = worker
                    next_task += 1
        return results

    def close_extras(self, terminate: bool = False):
        """Close the workers and clean up the pipes.

        Args:
            terminate: If ``True``, then all processes are terminated instead of being asked to stop.
        """
        if terminate:
            for process in self.processes:
                if process.is_alive():
                    process.terminate()
        else:
            for pipe in self.parent_pipes:
                if (pipe is not None) and (not pipe.closed):
                    pipe.send(("close", None))
            for pipe in self.parent_pipes:
                if (pipe is not None) and (not pipe.closed):
                    pipe.recv()

        for pipe in self.parent_pipes:
            if pipe is not None:
                pipe.close()
        for process in self.processes:
            process.join()

    def _assert_is_running(self):
        if self.closed:
            raise RuntimeError(
                f"Trying to operate on `{type(self).__name__}`, after a call to `close()`."
            )

    def _raise_worker_error(self, worker: int):
        index, exctype, value = self.error_queue.get()
        logger.error(
            "Received the following error from Worker-%d: %s: %s",
            index,
            exctype.__name__,
            value,
        )
        self.parent_pipes[index].close()
        self.parent_pipes[index] = None
        logger.error("Shutting down the pool and raising the exception in the main process.")
        self.close(terminate=True)
        raise value

    def __del__(self):
        if not getattr(self, "closed", True) and hasattr(self, "processes"):
            self.close(terminate=True)


def _worker(index, fn, pipe, parent_pipe, error_queue):
    parent_pipe.close()
    try:
        while True:
            command, data = pipe.recv()
            if command == "run":
                task_index, task = data
                pipe.send(((task_index, fn(task)), True))
            elif command == "close":
                pipe.send((None, True))
                break
            else:
                raise RuntimeError(
                    f"Received unknown command `{command}`. Must be one of {{`run`, `close`}}."
                )
    except (KeyboardInterrupt, Exception):
        error_queue.put((index,) + sys.exc_info()[:2])
        pipe.send((None, False))
