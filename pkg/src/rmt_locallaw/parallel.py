"""Order-preserving parallel map over independent sample jobs."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def default_workers() -> int:
    env = os.environ.get("RMT_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, min(4, os.cpu_count() or 1))


def pmap(fn, jobs, workers: int | None = None) -> list:
    """Apply fn to each job; results in job order regardless of scheduling.

    Jobs must be independent and seeded individually; threads are enough
    because the heavy kernels release the GIL inside LAPACK.
    """
    jobs = list(jobs)
    workers = workers if workers is not None else default_workers()
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
