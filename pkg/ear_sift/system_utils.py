"""
System Utilities

Worker-count resolution and an order-preserving parallel map used by the
evaluation harness to analyze images and score probe/reference pairs.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def get_nb_workers(workers: int = -1) -> int:
    """
    Retrieve the number of workers to use for parallel processing.

    Parameters
    ----------
    workers : int, optional
        The number of workers to use. If set to 0, uses the number of CPUs
        available on the system. If positive, uses that number of workers.
        If negative, uses the number of CPUs plus that integer plus one
        (following scikit-learn's convention). Defaults to -1.
        The ``NB_WORKERS`` environment variable replaces the CPU count.

    Returns
    -------
    int
        The number of workers to use, at least 1.

    Example
    -------
    >>> get_nb_workers(2)
    2
    """
    nb_workers = os.cpu_count() or 1
    if "NB_WORKERS" in os.environ:
        try:
            nb_workers = int(os.environ["NB_WORKERS"])
        except ValueError:
            logging.warning("NB_WORKERS environment variable is invalid. Using default CPU count.")

    if workers == 0:
        return max(1, nb_workers)
    if workers > 0:
        return workers
    return max(1, nb_workers + workers + 1)


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """
    Apply `func` to every item, possibly in worker processes.

    Results always come back in input order, so downstream score lists are
    canonical whatever the number of workers.

    Parameters
    ----------
    func : Callable
        A picklable (module-level) function.
    items : Iterable
        Inputs, each passed as the single argument of `func`.
    workers : int, optional
        Number of processes; 1 (default) runs in the calling process.

    Returns
    -------
    List
        ``[func(item) for item in items]``.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logging.info(f"Dispatching {len(items)} jobs to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
