"""Order-preserving chunked process-pool map."""

from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from itertools import islice
from typing import Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_CHUNK = 512


def available_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # not on every platform
        return os.cpu_count() or 1


def _chunks(items: Iterable[T], size: int) -> Iterator[list[T]]:
    it = iter(items)
    while chunk := list(islice(it, size)):
        yield chunk


def ordered_map(
    fn: Callable[[list[T]], list[R]],
    items: Iterable[T],
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> Iterator[R]:
    """Apply ``fn`` to consecutive chunks of ``items`` and yield results in input order.

    ``fn`` receives a list and must return a list of the same length; it has
    to be picklable when ``workers > 1``.  At most ``2 * workers`` chunks are
    in flight, so memory stays bounded for arbitrarily long inputs.  The
    output never depends on ``workers``.
    """
    if workers <= 1:
        for chunk in _chunks(items, chunk_size):
            yield from fn(chunk)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        for chunk in _chunks(items, chunk_size):
            pending.append(pool.submit(fn, chunk))
            if len(pending) >= 2 * workers:
                yield from pending.popleft().result()
        while pending:
            yield from pending.popleft().result()
