"""Block-wise work splitting with results that do not depend on thread count.

Work is cut into fixed-size row blocks. Each block is processed
independently (possibly on a thread pool) and partial results are combined
in block order, so the output is bit-identical for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

THREADS_ENV = "REWEIGHTED_PCA_THREADS"
BLOCK_ROWS = 8192

_forced_threads: int | None = None


def thread_count() -> int:
    if _forced_threads is not None:
        return _forced_threads
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@contextmanager
def sequential():
    """Force single-threaded execution inside the block."""
    global _forced_threads
    previous = _forced_threads
    _forced_threads = 1
    try:
        yield
    finally:
        _forced_threads = previous


def map_blocks(func, n_blocks: int, threads: int | None = None) -> list:
    threads = thread_count() if threads is None else max(1, int(threads))
    if threads == 1 or n_blocks <= 1:
        return [func(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(n_blocks)))


def weighted_cross(X: np.ndarray, Y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Compute ``sum_i w_i x_i y_i^T`` with a fixed block summation order."""
    n_rows = X.shape[0]
    n_blocks = max(1, -(-n_rows // BLOCK_ROWS))

    def partial(b):
        sl = slice(b * BLOCK_ROWS, (b + 1) * BLOCK_ROWS)
        return (X[sl] * w[sl, None]).T @ Y[sl]

    parts = map_blocks(partial, n_blocks)
    total = parts[0].copy()
    for part in parts[1:]:
        total += part
    return total
