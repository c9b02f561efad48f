"""Order-preserving worker pool.

The worker count comes from ``QELM_WITNESS_WORKERS`` (default 1, i.e. run
inline). Tasks carry their own seeds, so results do not depend on how they
are scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "QELM_WITNESS_WORKERS"


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def pmap(fn, tasks, workers: int | None = None) -> list:
    """``[fn(t) for t in tasks]``, possibly in worker processes; order is kept."""
    tasks = list(tasks)
    n = min(worker_count(workers), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks))
