"""Deterministic parallel map over independent jobs."""

from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, items, workers=1):
    """Map fn over items, preserving order.

    Results are independent of the worker count because every job derives its
    own random stream from its arguments; workers only change the schedule.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
