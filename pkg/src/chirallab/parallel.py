"""Realization-index partitioning over a fixed-size worker pool.

Work is split by realization index only; each worker gets a contiguous,
share-nothing slice and results are concatenated in index order, so the
output does not depend on the thread count or on scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar, Union

R = TypeVar("R")

Threads = Union[int, str, None]


def resolve_threads(threads: Threads = None) -> int:
    if threads is None:
        threads = os.environ.get("LAB_THREADS", 1)
    if threads == "auto":
        return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
    n = int(threads)
    if n < 1:
        raise ValueError("threads must be >= 1 or 'auto'")
    return n


def split(indices: Sequence[int], parts: int) -> list[list[int]]:
    indices = list(indices)
    parts = max(1, min(parts, len(indices)))
    size, extra = divmod(len(indices), parts)
    out, start = [], 0
    for p in range(parts):
        stop = start + size + (1 if p < extra else 0)
        out.append(indices[start:stop])
        start = stop
    return [c for c in out if c]


def map_indices(fn: Callable[[list[int]], R], indices: Sequence[int], threads: Threads = 1) -> list[R]:
    """Apply ``fn`` to contiguous chunks of ``indices``; results in chunk order."""
    n = resolve_threads(threads)
    chunks = split(indices, n)
    if n == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, chunks))
