import numpy as np
import pytest

from specular_diffusion.kinetic import (
    Maxwellian,
    deviation_noise_floor,
    hermite_coefficients,
)
from specular_diffusion.kinetic.maxwellian import multi_indices


def test_maxwellian_values() -> None:
    assert Maxwellian(2)(np.zeros(2)) == pytest.approx(1 / (2 * np.pi))
    expected = (2 * np.pi) ** -1.5 * np.exp(-0.5)
    assert Maxwellian(3)(np.array([1.0, 0.0, 0.0])) == pytest.approx(expected)


def test_maxwellian_unsupported_dimension() -> None:
    with pytest.raises(ValueError):
        Maxwellian(1)


def test_maxwellian_sample_variance() -> None:
    v = Maxwellian(2).sample(np.random.default_rng(0), 50_000, variance=3.0)
    assert v.var(axis=0) == pytest.approx((3, 3), rel=0.05)


def test_multi_indices() -> None:
    assert multi_indices(2, 2) == ((0, 1), (1, 0), (0, 2), (1, 1), (2, 0))
    assert len(multi_indices(2, 4)) == 14
    assert len(multi_indices(3, 4)) == 34


def test_noise_floor() -> None:
    assert deviation_noise_floor(2, 4, 14) == pytest.approx(1)


def test_maxwellian_samples_have_small_coefficients() -> None:
    n = 40_000
    v = Maxwellian(2).sample(np.random.default_rng(1), n)
    coefficients = hermite_coefficients(v, 4)
    deviation = np.sqrt(sum(c * c for c in coefficients.values()))
    assert deviation <= 4 * deviation_noise_floor(2, 4, n)


def test_shifted_samples() -> None:
    v = Maxwellian(2).sample(np.random.default_rng(2), 40_000) + np.array([1.0, 0.0])
    coefficients = hermite_coefficients(v, 2)
    assert coefficients[(1, 0)] == pytest.approx(1, abs=0.03)
    assert coefficients[(0, 1)] == pytest.approx(0, abs=0.03)
    # He₂(v + 1) has mean 1, normalized by √2!.
    assert coefficients[(2, 0)] == pytest.approx(1 / np.sqrt(2), abs=0.05)


@pytest.mark.parametrize("order", [0, 5])
def test_invalid_order(order: int) -> None:
    with pytest.raises(ValueError):
        hermite_coefficients(np.zeros((3, 2)), order)
