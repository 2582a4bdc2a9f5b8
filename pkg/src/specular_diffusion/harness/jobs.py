"""Ordered execution of independent jobs, serially or on a process pool."""

import logging
import multiprocessing as mp
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

logger = logging.getLogger(__name__)

A = TypeVar("A")
R = TypeVar("R")

_CONTEXT = mp.get_context("spawn")


def run_jobs(
    function: Callable[[A], R], arguments: Iterable[A], workers: int = 1
) -> list[R]:
    """`function` applied to each argument, results in argument order.

    `function` must be a module-level callable so that spawned workers can
    import it.
    """
    arguments = list(arguments)
    if workers <= 1 or len(arguments) <= 1:
        return [function(a) for a in arguments]
    logger.debug(f"Running {len(arguments)} jobs on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers, mp_context=_CONTEXT) as pool:
        return list(pool.map(function, arguments))
