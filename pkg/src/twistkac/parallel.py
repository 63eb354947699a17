"""Reproducible block-parallel sampling.

Samples are drawn in fixed-size blocks; block ``b`` owns the Philox stream
seeded by ``SeedSequence(seed, spawn_key=(b,))``.  Results are concatenated
in block order, so the output does not depend on how many threads run.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

THREADS_ENV = "TWISTKAC_THREADS"
DEFAULT_BLOCK = 4096


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(total: int, block: int = DEFAULT_BLOCK) -> list[int]:
    if total <= 0:
        raise ValueError("sample count must be positive")
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def block_size_for(width: int) -> int:
    """Block length keeping a block's working set near 2^22 complex entries."""
    return int(max(256, min(DEFAULT_BLOCK, (1 << 22) // max(1, width))))


def run_blocks(fn: Callable[[np.random.Generator, int], np.ndarray], total: int, seed: int,
               block: int = DEFAULT_BLOCK, threads: int | None = None) -> np.ndarray:
    """Call ``fn(rng, count)`` per block and concatenate along axis 0."""
    sizes = block_sizes(total, block)
    jobs = [(b, c) for b, c in enumerate(sizes)]
    threads = worker_count() if threads is None else threads

    def work(job):
        b, c = job
        return fn(block_rng(seed, b), c)

    if threads <= 1 or len(jobs) == 1:
        parts = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    return np.concatenate(parts, axis=0)


def mean_and_stderr(x: np.ndarray) -> tuple[complex, float]:
    """Sample mean and standard error along axis 0 (complex magnitude)."""
    x = np.asarray(x)
    n = x.shape[0]
    mean = x.mean(axis=0)
    if n < 2:
        return mean, float("inf")
    var = np.sum(np.abs(x - mean) ** 2, axis=0) / (n - 1)
    return mean, np.sqrt(var / n)
