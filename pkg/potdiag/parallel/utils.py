"""Miscellaneous utilities for worker processes."""
import contextlib
import os
from typing import Any, Callable

__all__ = ["CloudpickleWrapper", "clear_mpi_env_vars"]


class CloudpickleWrapper:
    """Wrapper that uses cloudpickle to ship a task function to a worker process.

    Task functions are often closures over a configuration (a process spec, a threshold grid),
    which the standard pickler refuses.
    """

    def __init__(self, fn: Callable[..., Any]):
        self.fn = fn

    def __getstate__(self):
        import cloudpickle

        return cloudpickle.dumps(self.fn)

    def __setstate__(self, ob):
        import pickle

        self.fn = pickle.loads(ob)

    def __call__(self, *args, **kwargs):
        return self.fn(*args, **kwargs)


@contextlib.contextmanager
def clear_mpi_env_vars():
    """Clears the MPI environment variables while worker processes are started.

    A child process inheriting ``OMPI_*`` or ``PMI_*`` variables believes it is an MPI rank
    and can hang on ``MPI_Init``.
    """
    removed_environment = {}
    for k, v in list(os.environ.items()):
        for prefix in ["OMPI_", "PMI_"]:
            if k.startswith(prefix):
                removed_environment[k] = v
                del os.environ[k]
    try:
        yield
    finally:
        os.environ.update(removed_environment)
