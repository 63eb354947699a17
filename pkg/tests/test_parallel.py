import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistkac.parallel import (THREADS_ENV, block_size_for, block_sizes, mean_and_stderr, run_blocks,
                               worker_count)


@given(st.integers(1, 100_000), st.integers(1, 5000))
def test_block_sizes_partition_total(total, block):
    sizes = block_sizes(total, block)
    assert sum(sizes) == total
    assert all(0 < s <= block for s in sizes)


def test_block_size_clamped():
    assert block_size_for(1) == 4096
    assert block_size_for(10 ** 9) == 256


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(THREADS_ENV, "junk")
    assert worker_count() >= 1


def test_run_blocks_independent_of_threads():
    fn = lambda rng, n: rng.standard_normal((n, 2))
    a = run_blocks(fn, 10_000, 5, 1000, threads=1)
    b = run_blocks(fn, 10_000, 5, 1000, threads=4)
    assert a.shape == (10_000, 2)
    assert np.array_equal(a, b)


def test_mean_and_stderr():
    x = np.array([1.0, 3.0, 5.0])
    mean, err = mean_and_stderr(x)
    assert mean == 3.0
    assert err == pytest.approx(2.0 / np.sqrt(3))
