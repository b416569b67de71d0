"""
Seeding and replicate execution.

Every replicate or draw block gets its own child seed derived from a master
seed and its index, so results do not depend on execution order or worker
count.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar('T')
R = TypeVar('R')


def seed_sequence(seed) -> np.random.SeedSequence:
    """A fresh SeedSequence for an integer seed or a copy of an existing one."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def spawn_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """Child seeds 0..count-1 of a master seed; the same call always returns the same children."""
    return seed_sequence(seed).spawn(count)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """
    Map fn over items, in order, optionally across worker processes.

    fn must be a module-level function when workers > 1.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
