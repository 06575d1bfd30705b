"""Process-pool map with a worker cap taken from ``PEELKIT_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

_STATE: dict = {}


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("PEELKIT_THREADS")
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def _init(state):
    _STATE.clear()
    _STATE.update(state)


def _call(args):
    fn, item = args
    return fn(_STATE, item)


def pmap(fn, items, state: dict, workers: int | None = None, chunksize: int = 64) -> list:
    """Map ``fn(state, item)`` over ``items`` preserving order.

    ``state`` is shipped once per worker rather than per item.  Results do
    not depend on the worker count.
    """
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2 * chunksize:
        return [fn(state, it) for it in items]
    with ProcessPoolExecutor(max_workers=n, initializer=_init, initargs=(state,)) as ex:
        return list(ex.map(_call, [(fn, it) for it in items], chunksize=chunksize))
