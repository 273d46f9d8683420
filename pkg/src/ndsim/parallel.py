"""Chunked trial dispatch.  Output order is trial order regardless of worker count."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence


def chunk_ranges(n: int, size: int) -> List[range]:
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def run_chunks(fn: Callable, chunks: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to every chunk and return the results in chunk order."""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
