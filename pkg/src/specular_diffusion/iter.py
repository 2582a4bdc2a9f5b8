"""Iterator utilities."""

from collections.abc import Callable, Iterator
from functools import wraps
from typing import ParamSpec, TypeVar

T = TypeVar("T")
P = ParamSpec("P")


def as_list(f: Callable[P, Iterator[T]]) -> Callable[P, list[T]]:
    """Decorator turning a generator function into a list-returning one."""

    @wraps(f)
    def inner(*args: P.args, **kwargs: P.kwargs) -> list[T]:
        return list(f(*args, **kwargs))

    return inner


@as_list
def blocks(n: int, size: int) -> Iterator[tuple[int, slice]]:
    """Consecutive (index, slice) pairs covering range(n) in chunks of `size`.

    The last chunk may be shorter.
    """
    if size < 1:
        raise ValueError(f"Block size must be positive, got {size}")
    for index, start in enumerate(range(0, n, size)):
        yield index, slice(start, min(start + size, n))


def pairwise_ratios(values: list[float]) -> Iterator[float]:
    """Relative change |b − a|/|a| between consecutive values."""
    for a, b in zip(values, values[1:]):
        yield abs(b - a) / abs(a) if a else float("inf")
