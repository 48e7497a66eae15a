"""Order-preserving thread pool bounded by LATLAB_THREADS.

Threads rather than processes: test functions carry closures, and the
heavy lifting happens inside numpy, which releases the GIL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidArgumentError


def worker_count() -> int:
    raw = os.environ.get("LATLAB_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"LATLAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidArgumentError("LATLAB_THREADS must be >= 1")
    return n


def parallel_map(func, items) -> list:
    """map(func, items) with results in input order; serial when one worker suffices."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
