import numpy as np
import pytest
from numpy.testing import assert_allclose

from specular_diffusion.geometry import (
    BoundaryClass,
    Domain,
    LevelSetDomain,
    UnitBall,
    exit_distance,
)

disk = UnitBall(2)


def test_unsupported_dimension() -> None:
    with pytest.raises(ValueError):
        UnitBall(4)


@pytest.mark.parametrize("x", [(1, 0), (0, -1)])
def test_unit_ball_normal(x: tuple[float, float]) -> None:
    assert_allclose(disk.normal_at(x), x)


def test_level_set_normal() -> None:
    ball = LevelSetDomain.ball(2, radius=2.0)
    assert_allclose(ball.normal_at((2, 0)), (1, 0))


def test_normal_off_boundary() -> None:
    with pytest.raises(Domain.OffBoundaryError):
        disk.normal_at((0.5, 0))


@pytest.mark.parametrize(
    "v,expected",
    [
        ((1, 0), (-1, 0)),
        ((0, 1), (0, 1)),
        ((1, 1), (-1, 1)),
    ],
)
def test_reflect(v: tuple[float, float], expected: tuple[float, float]) -> None:
    assert_allclose(disk.reflect((1, 0), v), expected)


def test_reflect_preserves_speed() -> None:
    x = np.array([np.cos(0.3), np.sin(0.3)])
    v = np.array([0.7, -2.1])
    speed = np.linalg.norm(v)
    assert np.linalg.norm(disk.reflect(x, v)) == pytest.approx(speed, rel=1e-12)


@pytest.mark.parametrize(
    "domain, semi_axes",
    [(disk, (1.0, 1.0)), (LevelSetDomain.ellipsoid([2.0, 1.0]), (2.0, 1.0))],
)
def test_reflect_is_an_involution(
    domain: Domain, semi_axes: tuple[float, float]
) -> None:
    rng = np.random.default_rng(11)
    for theta, v in zip(rng.uniform(0, 2 * np.pi, 200), rng.standard_normal((200, 2))):
        x = (semi_axes[0] * np.cos(theta), semi_axes[1] * np.sin(theta))
        reflected = domain.reflect(x, v)
        assert np.linalg.norm(reflected) == pytest.approx(np.linalg.norm(v), rel=1e-12)
        assert_allclose(domain.reflect(x, reflected), v, atol=1e-12)


@pytest.mark.parametrize(
    "v,kind,value",
    [
        ((1, 0), BoundaryClass.Kind.OUTGOING, 1),
        ((-1, 0), BoundaryClass.Kind.INCOMING, -1),
        ((0, 1), BoundaryClass.Kind.GRAZING, 0),
    ],
)
def test_classify(
    v: tuple[float, float], kind: BoundaryClass.Kind, value: float
) -> None:
    result = disk.classify((1, 0), v)
    assert result.kind == kind
    assert result.value == pytest.approx(value)


@pytest.mark.parametrize(
    "domain", [disk, LevelSetDomain.ball(2)], ids=["unit-ball", "level-set"]
)
@pytest.mark.parametrize(
    "x,w,s,exit_point",
    [
        ((0, 0), (1, 0), 1, (1, 0)),
        ((0.5, 0), (1, 0), 0.5, (1, 0)),
        ((0.5, 0), (0, 1), np.sqrt(0.75), (0.5, np.sqrt(0.75))),
    ],
)
def test_ray_exit(
    domain: Domain,
    x: tuple[float, float],
    w: tuple[float, float],
    s: float,
    exit_point: tuple[float, float],
) -> None:
    distance, point = domain.ray_exit(x, w)
    assert distance == pytest.approx(s, abs=1e-12)
    assert_allclose(point, exit_point, atol=1e-12)


def test_ray_exit_zero_direction() -> None:
    with pytest.raises(ValueError):
        disk.ray_exit((0, 0), (0, 0))


def test_ray_exit_outside() -> None:
    with pytest.raises(ValueError):
        disk.ray_exit((2, 0), (1, 0))


def test_ray_exit_ellipse() -> None:
    ellipse = LevelSetDomain.ellipsoid([2.0, 1.0])
    s, point = ellipse.ray_exit((0, 0), (1, 0))
    assert s == pytest.approx(2, abs=1e-12)
    s, point = ellipse.ray_exit((0, 0), (0, 1))
    assert s == pytest.approx(1, abs=1e-12)


def test_exit_distance_from_boundary() -> None:
    x = np.array([[1.0, 0.0], [1.0, 0.0]])
    w = np.array([[-1.0, 0.0], [1.0, 0.0]])
    assert_allclose(exit_distance(x, w), [2.0, 0.0])


def test_advance_matches_reflected_flight() -> None:
    # Centre ray of length 2.5: out to (1, 0), then back through the centre.
    x, w = disk.advance(np.zeros((1, 2)), np.array([[1.0, 0.0]]), np.array([2.5]))
    assert_allclose(x, [[-0.5, 0]], atol=1e-12)
    assert_allclose(w, [[-1, 0]], atol=1e-12)


def test_advance_level_set_agrees_with_unit_ball() -> None:
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.5, 0.5, (20, 2))
    w = rng.standard_normal((20, 2))
    length = rng.uniform(0, 5, 20)
    expected_x, expected_w = disk.advance(x, w, length)
    actual_x, actual_w = LevelSetDomain.ball(2).advance(x, w, length)
    assert_allclose(actual_x, expected_x, atol=1e-8)
    assert_allclose(actual_w, expected_w, atol=1e-8)


def test_advance_preserves_speed_3d() -> None:
    ball = UnitBall(3)
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.5, 0.5, (50, 3))
    w = rng.standard_normal((50, 3))
    new_x, new_w = ball.advance(x, w, 10.0)
    speeds = np.linalg.norm(w, axis=-1)
    assert_allclose(np.linalg.norm(new_w, axis=-1), speeds, rtol=1e-12)
    assert np.all(ball.contains(new_x))


def test_advance_tangent_slides_along_boundary() -> None:
    x, w = disk.advance(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.pi / 2)
    assert_allclose(x, [[0, 1]], atol=1e-12)
    assert_allclose(w, [[-1, 0]], atol=1e-12)


def test_advance_tangent_in_3d_keeps_speed() -> None:
    ball = UnitBall(3)
    x, w = ball.advance(np.array([[0.0, 0.0, 1.0]]), np.array([[2.0, 0.0, 0.0]]), 1.0)
    assert_allclose(np.linalg.norm(x), 1.0, rtol=1e-12)
    assert_allclose(np.linalg.norm(w), 2.0, rtol=1e-12)
    assert_allclose(x, [[np.sin(1.0), 0, np.cos(1.0)]], atol=1e-12)


def test_from_config() -> None:
    assert isinstance(Domain.from_config({"kind": "unit-ball", "dim": 3}), UnitBall)
    ellipse = Domain.from_config(
        {"kind": "level-set", "builtin": "ellipse", "semi_axes": [2, 1]}
    )
    assert ellipse.dim == 2
    assert ellipse.bounding_radius == 2
    assert ellipse.to_config() == {
        "kind": "level-set",
        "builtin": "ellipse",
        "semi_axes": [2.0, 1.0],
    }


def test_from_config_unknown() -> None:
    with pytest.raises(ValueError):
        Domain.from_config({"kind": "torus"})


def test_ellipsoid_invalid_axes() -> None:
    with pytest.raises(ValueError):
        LevelSetDomain.ellipsoid([1.0, -1.0])


def test_level_set_check() -> None:
    LevelSetDomain.ellipsoid([2.0, 1.0, 1.5]).check(samples=200)


def test_level_set_check_rejects_weak_convexity() -> None:
    ellipse = LevelSetDomain.ellipsoid([2.0, 1.0])
    overstated = LevelSetDomain(
        2,
        zeta_function=ellipse.zeta_function,
        gradient_function=ellipse.gradient_function,
        hessian_function=ellipse.hessian_function,
        convexity_constant=2.0,
        radius=2.0,
    )
    with pytest.raises(Domain.InvalidError):
        overstated.check(samples=100)
