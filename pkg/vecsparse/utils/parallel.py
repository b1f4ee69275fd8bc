"""Ordered thread fan-out."""

from __future__ import annotations

import concurrent.futures
from collections.abc import Iterable, Sequence
from typing import Callable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply ``fn`` to every item, optionally on a thread pool.

    Results always come back in input order, so output is independent of
    scheduling. NumPy releases the GIL inside its kernels, which is where the
    work happens.

    Args:
        fn: Function to apply
        items: Work items
        threads: Worker count; 1 runs inline

    Returns:
        List of results in input order
    """
    work: Sequence[T] = list(items)
    if threads <= 1 or len(work) <= 1:
        return [fn(item) for item in work]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, work))
