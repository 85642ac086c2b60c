import time

import numpy as np
import pytest

from potdiag import error
from potdiag.parallel import AsyncTaskPool, SyncTaskPool, make_pool
from potdiag.utils import seeding


def _draw(seed):
    rng, _ = seeding.np_random(seed)
    return float(rng.standard_normal())


def _slow_square(task):
    # later tasks finish first
    time.sleep(0.02 * (5 - task))
    return task * task


def _fail_on_three(task):
    if task == 3:
        raise error.InvalidParameter(f"Task {task} is invalid")
    return task


@pytest.mark.parametrize(
    "workers, pool_type", [(1, SyncTaskPool), (0, SyncTaskPool), (3, AsyncTaskPool)]
)
def test_make_pool(workers, pool_type):
    with make_pool(_draw, workers) as pool:
        assert isinstance(pool, pool_type)
    assert pool.closed


def test_results_in_task_order():
    with AsyncTaskPool(_slow_square, num_workers=3) as pool:
        assert pool.map(range(6)) == [0, 1, 4, 9, 16, 25]


def test_serial_and_parallel_agree():
    seeds = seeding.replicate_seeds(11, 8)
    with make_pool(_draw, 1) as serial, make_pool(_draw, 2) as parallel:
        np.testing.assert_array_equal(serial.map(seeds), parallel.map(seeds))


def test_closures_are_shipped_to_workers():
    offset = 10.0
    with AsyncTaskPool(lambda x: x + offset, num_workers=2) as pool:
        assert pool.map([1.0, 2.0]) == [11.0, 12.0]


def test_more_workers_than_tasks():
    with AsyncTaskPool(abs, num_workers=4) as pool:
        assert pool.map([-1]) == [1]
        assert pool.map([]) == []


@pytest.mark.parametrize("workers", [1, 2])
def test_worker_error_is_raised(workers):
    pool = make_pool(_fail_on_three, workers)
    with pytest.raises(error.InvalidParameter, match="Task 3 is invalid"):
        pool.map(range(5))
    pool.close()


def test_map_after_close():
    pool = AsyncTaskPool(abs, num_workers=2)
    pool.close()
    with pytest.raises(RuntimeError, match="after a call to `close\\(\\)`"):
        pool.map([1])
