"""Thread-pool map honoring the CALMING_THREADS cap.

Results are ordered by input index regardless of completion order, so
replication sweeps stay deterministic when each item owns its RNG stream.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def max_threads():
    raw = os.environ.get("CALMING_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def thread_map(fn, items):
    items = list(items)
    if not items:
        return []
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
