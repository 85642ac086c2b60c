"""Set of random number generator functions: seeding, generators and replicate seed splitting."""
from typing import Optional, Tuple

import numpy as np

from potdiag import error

ALGORITHM = "PCG64"
"""Name of the bit generator behind every stream, pinned into output metadata."""


def _check_seed(seed: Optional[int]):
    if seed is not None and not (
        isinstance(seed, (int, np.integer)) and not isinstance(seed, bool) and 0 <= seed
    ):
        raise error.Error(f"Seed must be a non-negative integer or omitted, not {seed}")


def np_random(seed: Optional[int] = None) -> Tuple[np.random.Generator, int]:
    """Generates a random number generator from the seed and returns the Generator and seed.

    Args:
        seed: The seed used to create the generator

    Returns:
        The generator and resulting seed (the drawn entropy if ``seed`` was omitted)

    Raises:
        Error: Seed must be a non-negative integer or omitted
    """
    _check_seed(seed)
    seed_seq = np.random.SeedSequence(None if seed is None else int(seed))
    np_seed = seed_seq.entropy
    rng = RandomNumberGenerator(np.random.PCG64(seed_seq))
    return rng, np_seed


def derive_seed(master: int, index: int) -> int:
    """Seed of the ``index``-th independent replicate drawn from the master seed.

    The splitting rule is ``master + index``, so replicate ``b`` of a run seeded with ``s``
    can be regenerated on its own with ``np_random(s + b)``.
    """
    _check_seed(master)
    if index < 0:
        raise error.Error(f"Replicate index must be non-negative, not {index}")
    return int(master) + int(index)


def replicate_seeds(master: int, count: int) -> Tuple[int, ...]:
    """Seeds of ``count`` replicates derived from ``master``."""
    return tuple(derive_seed(master, index) for index in range(count))


RNG = RandomNumberGenerator = np.random.Generator
