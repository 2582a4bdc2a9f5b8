from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from specular_diffusion.geometry import UnitBall
from specular_diffusion.initial import InitialDatum
from specular_diffusion.kinetic import (
    Diagnostics,
    ParticleEnsemble,
    boundary_flux,
    current_density,
    density,
    evolve,
    maxwellian_deviation,
    sample_initial,
    weighted_energy,
)
from specular_diffusion.mesh import Mesh

mesh = Mesh(2, 4, 8)
disk = UnitBall(2)


def ensemble_at(x: np.ndarray, v: np.ndarray, mass: float = 1.0) -> ParticleEnsemble:
    return ParticleEnsemble(x, v, 0.0, 0.1, 0, mass=mass, domain=disk)


def test_single_cell_density() -> None:
    x = np.tile([0.6, 0.1], (10, 1))
    rho = density(ensemble_at(x, np.zeros_like(x)), mesh)
    cell = mesh.locate(x[:1])[0]
    assert rho.values[cell] == pytest.approx(1 / mesh.volumes[cell])
    assert np.count_nonzero(rho.values) == 1
    assert rho.integral() == pytest.approx(1, abs=1e-12)


def test_uniform_density_within_poisson_error() -> None:
    n = 100_000
    ensemble = sample_initial(InitialDatum("uniform"), n, seed=0, eps=0.1)
    rho = density(ensemble, mesh)
    expected_counts = n * mesh.volumes / np.pi
    relative = np.abs(rho.values * np.pi - 1)
    assert np.all(relative < 5 / np.sqrt(expected_counts))
    assert rho.integral() == pytest.approx(1, abs=1e-12)


def test_constant_velocity_current() -> None:
    n = 5000
    ensemble = sample_initial(InitialDatum("uniform"), n, seed=1, eps=0.1)
    ensemble = replace(ensemble, v=np.tile([1.0, 0.0], (n, 1)))
    rho = density(ensemble, mesh)
    current = current_density(ensemble, mesh)
    assert_allclose(current.values[:, 0], rho.values)
    assert_allclose(current.values[:, 1], 0)


def test_maxwellian_current_vanishes() -> None:
    n = 50_000
    ensemble = sample_initial(InitialDatum("uniform"), n, seed=2, eps=0.1)
    current = current_density(ensemble, mesh)
    total = (current.values * mesh.volumes[:, None]).sum(axis=0)
    # Σ w·v has standard error 1/√n per component.
    assert np.all(np.abs(total) < 4 / np.sqrt(n))


def test_equilibrium_boundary_flux() -> None:
    ensemble = sample_initial(InitialDatum("uniform"), 50_000, seed=3, eps=0.1)
    flux = boundary_flux(ensemble, mesh)
    assert flux.standard_error > 0
    assert abs(flux.z_score) < 4


def test_outward_flux_is_positive() -> None:
    x = np.tile([0.9, 0.0], (100, 1))
    v = np.tile([1.0, 0.0], (100, 1))
    assert boundary_flux(ensemble_at(x, v), mesh).value > 0


def test_deviation_of_shifted_velocities() -> None:
    n = 20_000
    ensemble = sample_initial(InitialDatum("uniform"), n, seed=4, eps=0.1)
    assert maxwellian_deviation(ensemble) < 4 * np.sqrt(14 / n)
    shifted = replace(ensemble, v=ensemble.v + np.array([1.0, 0.0]))
    assert maxwellian_deviation(shifted) > 1


def test_energy_of_resting_cluster() -> None:
    x = np.tile([0.6, 0.1], (10, 1))
    ensemble = ensemble_at(x, np.zeros_like(x))
    cell = mesh.locate(x[:1])[0]
    # He_2(0) = −1 and He_4(0) = 3: c_(2,0) = c_(0,2) = −1/√2,
    # c_(4,0) = c_(0,4) = 3/√24 and c_(2,2) = 1/2.
    assert maxwellian_deviation(ensemble) == pytest.approx(np.sqrt(2))
    expected = 1 / mesh.volumes[cell] + np.sqrt(2)
    assert weighted_energy(ensemble, mesh) == pytest.approx(expected)
    assert Diagnostics.measure(ensemble, mesh).energy == pytest.approx(expected)


def test_spatial_energy_is_quadratic_in_mass() -> None:
    ensemble = sample_initial(InitialDatum("bump"), 2000, seed=5, eps=0.1)
    doubled = replace(ensemble, mass=2.0)
    deviation = maxwellian_deviation(ensemble)
    assert weighted_energy(doubled, mesh) - deviation == pytest.approx(
        4 * (weighted_energy(ensemble, mesh) - deviation)
    )


def test_deviation_relaxes_faster_at_smaller_eps() -> None:
    n = 5000
    datum = InitialDatum("uniform", velocity_variance=4.0)
    deviations = {}
    for eps in (0.4, 0.1):
        *_, final = evolve(sample_initial(datum, n, seed=9, eps=eps), 0.05)
        deviations[eps] = maxwellian_deviation(final)
    assert deviations[0.1] < deviations[0.4]
    assert deviations[0.1] < 4 * np.sqrt(14 / n)


def test_measure() -> None:
    ensemble = sample_initial(InitialDatum("bump"), 2000, seed=6, eps=0.2)
    diagnostics = Diagnostics.measure(ensemble, mesh)
    assert diagnostics.t == 0
    assert diagnostics.particles == 2000
    assert diagnostics.mass == pytest.approx(1, abs=1e-12)
    assert diagnostics.energy == pytest.approx(weighted_energy(ensemble, mesh))
    assert diagnostics.velocity_variance == pytest.approx(1, abs=0.1)


def test_mass_conserved_along_trajectory() -> None:
    ensemble = sample_initial(InitialDatum("bump"), 3000, seed=7, eps=0.2)
    for state in evolve(ensemble, 0.02, every=2):
        assert density(state, mesh).integral() == pytest.approx(1, abs=1e-12)


def test_bump_energy_decreases() -> None:
    ensemble = sample_initial(InitialDatum("bump"), 20_000, seed=8, eps=0.2)
    energies = [
        Diagnostics.measure(state, mesh).energy
        for state in evolve(ensemble, 0.05, every=10)
    ]
    assert energies[-1] < energies[0]


def test_particles_outside_mesh() -> None:
    x = np.array([[0.5, 0.0], [0.0, 0.9]])
    small = Mesh(2, 2, 4, radius=0.6)
    with pytest.raises(ValueError):
        density(ensemble_at(x, np.zeros_like(x)), small)
    free = ParticleEnsemble(
        x, np.zeros_like(x), 0.0, 0.1, 0, boundary_mode="free-space"
    )
    assert density(free, small).integral() == pytest.approx(0.5)


def test_dimension_mismatch() -> None:
    x = np.zeros((3, 2))
    with pytest.raises(ValueError):
        density(ensemble_at(x, x), Mesh.radial(3, 4))


def test_table_fields() -> None:
    labels = [label for label, _ in Diagnostics.__table_fields__()]
    assert labels[0] == "t"
    assert "Boundary flux" in labels
