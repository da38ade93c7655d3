"""Counter-based random streams keyed by (seed, stream key, block index).

Draws are produced in fixed-size blocks, each from its own Philox stream,
so the output is bitwise identical however the blocks are scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK = 4096

# stream keys; arbitrary but fixed
KEY_X = 1
KEY_Y = 2
KEY_AUX = 3
KEY_PERM = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("CONEWISH_THREADS", "1")))
    except ValueError:
        return 1


def blocked(seed: int, key: int, n: int, fn: Callable[[np.random.Generator, int], np.ndarray],
            block: int = BLOCK) -> np.ndarray:
    """Concatenate per-block draws for a total of n.

    Every block draws a full ``block`` and is then cut, so a shorter run is a
    prefix of a longer one with the same seed and key.
    """
    sizes = [min(block, n - start) for start in range(0, n, block)]
    jobs = [(b, s) for b, s in enumerate(sizes)]

    def run(job):
        b, s = job
        return fn(stream(seed, key, b), block)[:s]

    threads = thread_cap()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    if not parts:
        return fn(stream(seed, key, 0), 0)
    return np.concatenate(parts, axis=0)
