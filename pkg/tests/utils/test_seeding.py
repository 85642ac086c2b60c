import pickle

import numpy as np
import pytest

from potdiag import error
from potdiag.utils import seeding


@pytest.mark.parametrize("seed", [-1, "test", 1.5, True])
def test_invalid_seeds(seed):
    with pytest.raises(error.Error):
        seeding.np_random(seed)


def test_valid_seeds():
    for seed in [0, 1]:
        random, seed1 = seeding.np_random(seed)
        assert seed == seed1


def test_streams_are_reproducible():
    first, _ = seeding.np_random(42)
    second, _ = seeding.np_random(42)
    np.testing.assert_array_equal(first.random(10), second.random(10))
    assert isinstance(first.bit_generator, np.random.PCG64)
    assert seeding.ALGORITHM == "PCG64"


def test_replicate_seeds():
    assert seeding.replicate_seeds(7, 3) == (7, 8, 9)
    assert seeding.derive_seed(7, 2) == 9
    with pytest.raises(error.Error):
        seeding.derive_seed(7, -1)


def test_replicate_regenerated_on_its_own():
    seeds = seeding.replicate_seeds(100, 5)
    draws = [seeding.np_random(s)[0].random() for s in seeds]
    assert seeding.np_random(103)[0].random() == draws[3]


def test_rng_pickle():
    rng, _ = seeding.np_random(seed=0)
    pickled = pickle.dumps(rng)
    rng2 = pickle.loads(pickled)
    assert isinstance(
        rng2, seeding.RandomNumberGenerator
    ), "Unpickled object is not a RandomNumberGenerator"
    assert rng.random() == rng2.random()
