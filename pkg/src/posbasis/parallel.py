"""Thread fan-out with order-preserving results and fixed RNG streams."""

from __future__ import annotations

import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

_threads: int | None = None


def set_threads(n: int | None) -> None:
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be positive")
    _threads = n


def thread_count() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("POSBASIS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators, one per restart, fixed by the seed alone."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
