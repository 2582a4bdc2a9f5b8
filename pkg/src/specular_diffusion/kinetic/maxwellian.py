"""The centred Gaussian velocity equilibrium and Hermite moments of velocity samples."""

import itertools
import math
from dataclasses import dataclass
from functools import cache

import numpy as np
from numpy.polynomial import hermite_e

from ..geometry import SUPPORTED_DIMS, Array

MAX_MOMENT_ORDER = 4

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class Maxwellian:
    """M(v) = (2π)^(−d/2)·exp(−|v|²/2)."""

    dim: int

    def __post_init__(self) -> None:
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"Unsupported dimension {self.dim}")

    def __call__(self, v: Array) -> Array:
        v = np.asarray(v, dtype=np.float64)
        squared = np.sum(v * v, axis=-1)
        return np.asarray((2 * np.pi) ** (-self.dim / 2) * np.exp(-squared / 2))

    def sample(
        self, rng: np.random.Generator, n: int, variance: float = 1.0
    ) -> Array:
        """`n` draws from the Maxwellian.

        A `variance` other than one samples its per-component rescaling.
        """
        return np.sqrt(variance) * rng.standard_normal((n, self.dim))


@cache
def multi_indices(dim: int, order: int) -> tuple[MultiIndex, ...]:
    """All multi-indices α with 1 ≤ |α| ≤ order, graded by |α|."""
    return tuple(
        alpha
        for total in range(1, order + 1)
        for alpha in itertools.product(range(total + 1), repeat=dim)
        if sum(alpha) == total
    )


def hermite_coefficients(v: Array, order: int) -> dict[MultiIndex, float]:
    """Normalized tensor Hermite moments ⟨He_α(v)⟩/√α! of velocity samples.

    All of them vanish in expectation for Maxwellian samples, where each has
    variance 1/n.
    """
    if not 1 <= order <= MAX_MOMENT_ORDER:
        raise ValueError(
            f"Moment order must lie in [1, {MAX_MOMENT_ORDER}], got {order}"
        )
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    # He_k(v_j) for every component j and degree k ≤ order.
    degrees = np.eye(order + 1)
    table = np.stack([hermite_e.hermeval(v, degrees[k]) for k in range(order + 1)])
    coefficients = {}
    for alpha in multi_indices(v.shape[-1], order):
        product = np.prod([table[k, :, j] for j, k in enumerate(alpha)], axis=0)
        norm = math.sqrt(math.prod(math.factorial(k) for k in alpha))
        coefficients[alpha] = float(product.mean() / norm)
    return coefficients


def deviation_noise_floor(dim: int, order: int, n: int) -> float:
    """Expected size √(M/n) of the Hermite deviation of n exact Maxwellian samples."""
    return math.sqrt(len(multi_indices(dim, order)) / n)
