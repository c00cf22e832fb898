"""Reproducible Monte Carlo plumbing: seeded substreams, chunked parallel
evaluation and batch-means standard errors."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

T = TypeVar("T")

N_BATCHES = 20
DEFAULT_CHUNK = 50_000


def max_workers() -> int:
    """Worker cap, read from ``GENBOUND_THREADS`` (default: CPU count)."""
    raw = os.environ.get("GENBOUND_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def substreams(seed: int, count: int) -> List[np.random.Generator]:
    """``count`` independent generators derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def chunk_sizes(total: int, chunk: int = DEFAULT_CHUNK) -> List[int]:
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunked(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed: int,
    chunk: int = DEFAULT_CHUNK,
) -> List[T]:
    """Evaluate ``fn(rng, size)`` over a fixed partition of ``total`` draws.

    The partition and the per-chunk streams depend only on ``total``,
    ``chunk`` and ``seed``, so results are identical for any worker count.
    Results come back in chunk order.
    """
    sizes = chunk_sizes(total, chunk)
    rngs = substreams(seed, len(sizes))
    workers = min(max_workers(), len(sizes)) or 1
    if workers == 1:
        return [fn(r, s) for r, s in zip(rngs, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, rngs, sizes))


def batch_means(values: Sequence[float] | np.ndarray, n_batches: int = N_BATCHES) -> Tuple[float, float]:
    """Mean and batch-means standard error of a stream of draws."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    mean = float(x.mean())
    b = min(n_batches, x.size)
    if b < 2:
        return mean, 0.0
    means = np.array([chunk.mean() for chunk in np.array_split(x, b)])
    return mean, float(means.std(ddof=1) / np.sqrt(b))
