"""Order-preserving trial map over worker processes."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def map_trials(fn, items, workers=1):
    """``[fn(item) for item in items]``, optionally spread over processes.

    Results come back in input order, so output never depends on ``workers``.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
