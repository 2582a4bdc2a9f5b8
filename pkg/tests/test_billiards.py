import numpy as np
import pytest
from numpy.testing import assert_allclose

from specular_diffusion.billiards import (
    ChordTerms,
    SpecularCycle,
    disk_cycle,
    disk_endpoint_analytic,
    disk_endpoint_batch,
    endpoint,
    plane_basis,
    reflection_count,
    specular_cycle,
)
from specular_diffusion.geometry import LevelSetDomain, UnitBall

disk = UnitBall(2)
level_set_disk = LevelSetDomain.ball(2)


def test_cycle_without_reflection() -> None:
    cycle = disk_cycle((0, 0), (0.5, 0))
    assert cycle.reflection_count == 0
    assert_allclose(cycle.breakpoints, [0])
    assert_allclose(cycle.endpoint, (0.5, 0))


def test_cycle_through_centre() -> None:
    cycle = disk_cycle((0, 0), (3, 0))
    assert cycle.reflection_count == 2
    assert_allclose(cycle.path_lengths, [0, 1, 3])
    assert_allclose(cycle.breakpoints, [0, 1 / 3, 1])
    assert_allclose(cycle.reflection_points, [(1, 0), (-1, 0)], atol=1e-12)
    assert_allclose(cycle.endpoint, (-1, 0), atol=1e-12)


def test_chords_after_first_hit_have_equal_length() -> None:
    cycle = disk_cycle((0.5, 0), (0, 10))
    chords = np.diff(cycle.path_lengths[1:])
    assert len(chords) > 3
    assert_allclose(chords, np.sqrt(3), rtol=1e-12)
    points = cycle.reflection_points
    spacing = np.linalg.norm(np.diff(points, axis=0), axis=-1)
    assert_allclose(spacing, np.sqrt(3), rtol=1e-12)


def test_directions_rotate_by_constant_angle() -> None:
    cycle = disk_cycle((0.5, 0), (0, 5))
    turn = 2 * np.pi / 3
    for k, velocity in enumerate(cycle.velocities):
        expected = 5 * np.array([-np.sin(k * turn), np.cos(k * turn)])
        assert_allclose(velocity, expected, atol=1e-12)


@pytest.mark.parametrize(
    "x,v,eta",
    [
        ((0.3, 0.2), (0.1, -0.1), (0.4, 0.1)),
        ((0, 0), (3, 0), (-1, 0)),
        ((0, 0), (5, 0), (1, 0)),
        ((0, 0), (0, 5), (0, 1)),
        # The path ends one diameter past (-1, 0), back at the centre.
        ((0, 0), (4, 0), (0, 0)),
        ((0.5, 0), (0, np.sqrt(0.75)), (0.5, np.sqrt(0.75))),
    ],
)
def test_disk_endpoint(
    x: tuple[float, float], v: tuple[float, float], eta: tuple[float, float]
) -> None:
    assert_allclose(disk_endpoint_analytic(x, v).eta, eta, atol=1e-12)


@pytest.mark.parametrize("speed,count", [(0.5, 0), (3, 2), (4.5, 2), (5.5, 3)])
def test_reflection_count(speed: float, count: int) -> None:
    assert reflection_count(disk, (0, 0), (0, speed)) == count


def test_grazing_start() -> None:
    with pytest.raises(SpecularCycle.GrazingError):
        disk_cycle((1, 0), (0, 1))
    with pytest.raises(SpecularCycle.GrazingError):
        specular_cycle(level_set_disk, (1, 0), (0, 1))


def test_outgoing_boundary_start_reflects_first() -> None:
    cycle = specular_cycle(disk, (1, 0), (0.5, 0))
    assert cycle.reflection_count == 1
    assert_allclose(cycle.breakpoints, [0, 0])
    assert_allclose(cycle.endpoint, (0.5, 0), atol=1e-12)


def test_start_outside() -> None:
    with pytest.raises(ValueError):
        disk_cycle((1.5, 0), (1, 0))
    with pytest.raises(ValueError):
        specular_cycle(disk, (1.5, 0), (1, 0))


def test_runaway() -> None:
    with pytest.raises(SpecularCycle.RunawayError):
        specular_cycle(disk, (0, 0), (100, 0), max_reflections=10)


def test_marched_cycle_matches_closed_form() -> None:
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-0.6, 0.6, 2)
        v = rng.uniform(-6, 6, 2)
        expected = disk_cycle(x, v)
        actual = specular_cycle(level_set_disk, x, v)
        assert actual.reflection_count == expected.reflection_count
        assert_allclose(actual.endpoint, expected.endpoint, atol=1e-8)
        assert_allclose(actual.reflection_points, expected.reflection_points, atol=1e-8)


def test_marched_cycle_preserves_speed() -> None:
    ellipse = LevelSetDomain.ellipsoid([2.0, 1.0])
    cycle = specular_cycle(ellipse, (0.3, -0.2), (4.0, 7.0))
    assert cycle.reflection_count > 0
    assert_allclose(np.linalg.norm(cycle.velocities, axis=-1), cycle.speed, rtol=1e-12)
    assert_allclose(ellipse.zeta(cycle.reflection_points), 0, atol=1e-10)
    assert np.all(np.diff(cycle.breakpoints) >= 0)
    assert cycle.breakpoints[-1] <= 1


def test_ball_cycle_matches_marched_3d() -> None:
    ball = UnitBall(3)
    x = np.array([0.2, 0.1, 0.3])
    v = np.array([1.0, 2.0, -1.0])
    expected = specular_cycle(ball, x, v)
    actual = disk_cycle(x, v)
    assert actual.reflection_count == expected.reflection_count
    assert_allclose(actual.endpoint, expected.endpoint, atol=1e-10)
    assert_allclose(actual.reflection_points, expected.reflection_points, atol=1e-10)


def test_generic_endpoint() -> None:
    result = endpoint(disk, (0.3, 0.2), (0.1, -0.1))
    assert_allclose(result.eta, (0.4, 0.1))
    assert result.reflection_count == 0
    assert result.path_length == pytest.approx(np.hypot(0.1, 0.1))


def test_batch_matches_single() -> None:
    rng = np.random.default_rng(4)
    x = rng.uniform(-0.6, 0.6, (50, 2))
    v = rng.uniform(-5, 5, (50, 2))
    v[0] = 0
    eta, counts = disk_endpoint_batch(x, v)
    for i in range(len(x)):
        cycle = disk_cycle(x[i], v[i])
        assert counts[i] == cycle.reflection_count
        assert_allclose(eta[i], cycle.endpoint, atol=1e-12)


def test_chord_terms() -> None:
    terms = ChordTerms.compute(np.array([0.5, 0.0]), np.array([0.0, 1.0]))
    assert float(terms.chord) == pytest.approx(np.sqrt(3))
    assert float(terms.turn) == pytest.approx(2 * np.pi / 3)
    assert float(terms.first_hit) == pytest.approx(np.sqrt(0.75))


def test_plane_basis_3d() -> None:
    x = np.array([0.1, 0.2, 0.3])
    v = np.array([1.0, -1.0, 0.5])
    basis = plane_basis(x, v)
    assert_allclose(basis.T @ basis, np.eye(2), atol=1e-12)
    assert_allclose(basis @ (basis.T @ x), x, atol=1e-12)
    assert_allclose(basis @ (basis.T @ v), v, atol=1e-12)


def test_to_json_truncates() -> None:
    cycle = disk_cycle((0, 0), (0, 101))
    document = cycle.to_json(max_points=5)
    assert document["reflection_count"] == 51
    assert document["truncated"]
    assert len(document["reflection_points"]) == 5
    assert len(document["breakpoints"]) == 6
