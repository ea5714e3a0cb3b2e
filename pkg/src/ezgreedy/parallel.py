"""Order-preserving parallel map over independent trials."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def _call(job):
    fn, args = job
    return fn(*args)


def default_workers() -> int:
    return os.cpu_count() or 1


def run_trials(fn: Callable, arg_tuples: Sequence[tuple], workers: int = 1) -> list:
    """``[fn(*args) for args in arg_tuples]``, optionally across processes.

    Results come back in input order, so any aggregation done by the caller
    is identical for every worker count.
    """
    jobs = [(fn, tuple(args)) for args in arg_tuples]
    if workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_call, jobs, chunksize=1))
