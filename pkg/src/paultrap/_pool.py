"""Ordered map over a process pool; results never depend on worker count."""
from concurrent.futures import ProcessPoolExecutor


def ordered_map(func, items, workers=1):
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))
