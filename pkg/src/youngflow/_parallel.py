"""Worker-count plumbing for embarrassingly parallel sweeps.

The YOUNGFLOW_THREADS environment variable sets the worker count
(default 1). parallel_map preserves input order, so results are
identical regardless of the worker count as long as fn is pure.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "YOUNGFLOW_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return n


def parallel_map(fn, items, workers: int | None = None) -> list:
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
