"""Seeded, splittable random streams and exact categorical sampling.

Sample ``j`` of a run belongs to block ``j // BLOCK_SIZE``. Block ``b`` draws
from ``PCG64(SeedSequence(seed mod 2**64, spawn_key=(b,)))``, so results do not
depend on how blocks are spread over workers. Categorical draws compare a
uniform integer below the common denominator against integer cumulative
weights, which keeps them free of floating-point rounding.
"""

from __future__ import annotations

import bisect
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, TypeVar

import numpy as np

BLOCK_SIZE = 10_000
WORKERS_ENV = "NIFLDP_WORKERS"

T = TypeVar("T")


def block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(block,))
    return np.random.Generator(np.random.PCG64(ss))


def randbelow(rng: np.random.Generator, n: int) -> int:
    if n <= 0:
        raise ValueError("n must be positive")
    if n < 2**62:
        return int(rng.integers(0, n))
    k = n.bit_length()
    nbytes = (k + 7) // 8
    while True:
        x = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - k)
        if x < n:
            return x


class ExactSampler:
    """Draws items with exactly the given rational probabilities."""

    def __init__(self, items: Sequence[Any], probs: Sequence[Fraction]):
        if len(items) != len(probs) or not items:
            raise ValueError("need one probability per item and at least one item")
        denom = math.lcm(*(p.denominator for p in probs))
        cum, acc = [], 0
        for p in probs:
            acc += p.numerator * (denom // p.denominator)
            cum.append(acc)
        if acc != denom:
            raise ValueError("probabilities must sum to 1")
        self.items = list(items)
        self._cum = cum
        self._denom = denom

    def sample(self, rng: np.random.Generator):
        u = randbelow(rng, self._denom)
        return self.items[bisect.bisect_right(self._cum, u)]


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


def block_sizes(total: int) -> list[int]:
    full, rest = divmod(total, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def run_blocks(fn: Callable[..., T], total: int, *args: Any, workers: int | None = None) -> list[T]:
    """Calls ``fn(*args, size, block_index)`` for each block, in block order."""
    sizes = block_sizes(total)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(sizes) <= 1:
        return [fn(*args, n, b) for b, n in enumerate(sizes)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args, n, b) for b, n in enumerate(sizes)]
        return [f.result() for f in futures]
