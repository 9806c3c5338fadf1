"""Deterministic thread-pool map.

Work items are split into contiguous chunks whose results are stitched back
in input order, so the output never depends on the number of threads or on
scheduling. The compiled kernels release the GIL, which is where threads pay
off.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def chunked(seq: Sequence, n_chunks: int) -> list[Sequence]:
    n = len(seq)
    n_chunks = max(1, min(n_chunks, n))
    bounds = [round(i * n / n_chunks) for i in range(n_chunks + 1)]
    return [seq[bounds[i]:bounds[i + 1]] for i in range(n_chunks)]


def ordered_map(func: Callable, items: Sequence, threads: int = 1) -> list:
    """``[func(x) for x in items]``, optionally evaluated on a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
