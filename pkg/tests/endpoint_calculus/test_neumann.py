import numpy as np
import pytest
from numpy.testing import assert_allclose

from specular_diffusion.endpoint_calculus import (
    FAMILY_SIZE,
    TestFunction,
    composite_laplacian,
    endpoint_derivatives,
    neumann_family,
    test_function_laplacian as psi_laplacian,
)
from specular_diffusion.geometry import UnitBall

disk = UnitBall(2)

FAMILY_2D = [neumann_family(i, 2) for i in range(FAMILY_SIZE)]
FAMILY_3D = [neumann_family(i, 3) for i in range(FAMILY_SIZE - 1)]


def squared_norm() -> TestFunction:
    return TestFunction.radial_polynomial(
        "|x|²", lambda s: s, lambda s: np.ones_like(s), lambda s: np.zeros_like(s)
    )


def test_constant_has_zero_laplacian() -> None:
    assert psi_laplacian(disk, neumann_family(0), 0.0, (0.3, 0.2), (2.3, -1.7)) == 0
    assert psi_laplacian(disk, neumann_family(0), 0.0, (0, 0), (0.1, 0)) == 0


def test_non_neumann_function_is_rejected() -> None:
    psi = squared_norm()
    assert not psi.neumann_ok
    with pytest.raises(TestFunction.ContractError):
        psi_laplacian(disk, psi, 0.0, (0, 0), (3, 0))
    with pytest.raises(TestFunction.ContractError):
        psi.check_neumann(2)


@pytest.mark.parametrize("psi", FAMILY_2D, ids=lambda psi: psi.name)
def test_family_is_neumann_2d(psi: TestFunction) -> None:
    assert psi.neumann_ok
    assert psi.check_neumann(2, samples=200) <= 1e-12


@pytest.mark.parametrize("psi", FAMILY_3D, ids=lambda psi: psi.name)
def test_family_is_neumann_3d(psi: TestFunction) -> None:
    assert psi.check_neumann(3, samples=200) <= 1e-12


def test_family_index_out_of_range() -> None:
    with pytest.raises(ValueError):
        neumann_family(4, 3)
    with pytest.raises(ValueError):
        neumann_family(FAMILY_SIZE, 2)


def test_quartic_values() -> None:
    psi = neumann_family(1)
    x = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    assert_allclose(psi.value(0.0, x), [1, 0.5625, 0])


@pytest.mark.parametrize(
    "psi,dim",
    [(psi, 2) for psi in FAMILY_2D] + [(psi, 3) for psi in FAMILY_3D],
    ids=lambda value: value.name if isinstance(value, TestFunction) else f"{value}d",
)
def test_derivatives_match_finite_differences(psi: TestFunction, dim: int) -> None:
    rng = np.random.default_rng(7)
    x = rng.uniform(-0.5, 0.5, (5, dim))
    h = 1e-5
    t = 0.01
    for j in range(dim):
        step = np.zeros(dim)
        step[j] = h
        gradient = (psi.value(t, x + step) - psi.value(t, x - step)) / (2 * h)
        assert_allclose(psi.gradient(t, x)[:, j], gradient, atol=1e-7)
        hessian = (psi.gradient(t, x + step) - psi.gradient(t, x - step)) / (2 * h)
        assert_allclose(psi.hessian(t, x)[:, :, j], hessian, atol=1e-6)
    time_derivative = (psi.value(t + h, x) - psi.value(t - h, x)) / (2 * h)
    assert_allclose(psi.time_derivative(t, x), time_derivative, atol=1e-6)


@pytest.mark.parametrize("dim", [2, 3])
def test_radial_mode_is_eigenfunction(dim: int) -> None:
    psi = neumann_family(2, dim)
    x = np.random.default_rng(8).uniform(-0.5, 0.5, (10, dim))
    assert_allclose(psi.laplacian(0.2, x), psi.time_derivative(0.2, x), atol=1e-10)


def test_angular_mode_is_eigenfunction() -> None:
    psi = neumann_family(4)
    x = np.random.default_rng(9).uniform(-0.5, 0.5, (10, 2))
    assert_allclose(psi.laplacian(0.1, x), psi.time_derivative(0.1, x), atol=1e-10)


def test_time_factor() -> None:
    psi = neumann_family(1).with_time_factor(0.5)
    x = np.array([[0.2, 0.3]])
    assert psi.final_time == 0.5
    assert_allclose(psi.value(0.5, x), 0, atol=1e-15)
    assert_allclose(psi.value(0.0, x), neumann_family(1).value(0.0, x))
    assert_allclose(psi.time_derivative(0.1, x), -2 * neumann_family(1).value(0.1, x))


def test_time_factor_must_vanish() -> None:
    with pytest.raises(TestFunction.ContractError):
        neumann_family(1).with_time_factor(
            0.5, factor=lambda t: 1.0, derivative=lambda t: 0.0
        )


def test_free_flight_laplacian() -> None:
    psi = neumann_family(1)
    x, u = np.array([0.1, 0.2]), np.array([0.3, -0.1])
    expected = float(psi.laplacian(0.0, x + u)[0])
    assert psi_laplacian(disk, psi, 0.0, x, u) == pytest.approx(expected)


@pytest.mark.parametrize("index", [1, 2, 3])
def test_composite_laplacian_matches_finite_differences(index: int) -> None:
    psi = neumann_family(index)
    x = np.array([0.3, 0.1])
    u = np.array([2.3, 1.1])
    h = 1e-4

    def composed(w: np.ndarray) -> float:
        eta = endpoint_derivatives(disk, x, w).eta
        return float(psi.value(0.0, eta[None, :])[0])

    center = composed(u)
    second = sum(
        composed(u + step) - 2 * center + composed(u - step) for step in h * np.eye(2)
    )
    numeric = second / h**2
    assert psi_laplacian(disk, psi, 0.0, x, u) == pytest.approx(numeric, abs=1e-4)


def test_composite_laplacian_rows() -> None:
    psi = neumann_family(1)
    eta = np.array([[0.1, 0.2], [0.3, 0.0]])
    identity = np.broadcast_to(np.eye(2), (2, 2, 2))
    composite = composite_laplacian(psi, 0.0, eta, identity, np.zeros((2, 2)))
    assert_allclose(composite, psi.laplacian(0.0, eta))
