"""Macroscopic observables of particle ensembles on a mesh."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..mesh import IndexArray, Mesh, ScalarField, VectorField
from ..render import TableFields
from .ensemble import ParticleEnsemble
from .maxwellian import MAX_MOMENT_ORDER, hermite_coefficients

logger = logging.getLogger(__name__)


def _locate(ensemble: ParticleEnsemble, mesh: Mesh) -> IndexArray:
    if mesh.dim != ensemble.dim:
        raise ValueError(
            f"Mesh dimension {mesh.dim} does not match "
            f"ensemble dimension {ensemble.dim}"
        )
    cells = mesh.locate(ensemble.x)
    if (outside := int((cells < 0).sum())) and ensemble.boundary_mode == "reflecting":
        raise ValueError(
            f"{outside} particles lie outside a mesh of radius {mesh.radius}"
        )
    if outside:
        logger.debug(
            f"{outside} free-space particles lie outside the mesh and are not counted"
        )
    return cells


def density(ensemble: ParticleEnsemble, mesh: Mesh) -> ScalarField:
    """Cell histogram of positions, scaled by particle weight over cell volume."""
    cells = _locate(ensemble, mesh)
    counts = np.bincount(cells[cells >= 0], minlength=mesh.size)
    return ScalarField(mesh, counts * ensemble.weight / mesh.volumes)


def current_density(ensemble: ParticleEnsemble, mesh: Mesh) -> VectorField:
    """Cell averages of Σ w·v, the kinetic current."""
    cells = _locate(ensemble, mesh)
    inside = cells >= 0
    values = np.stack(
        [
            np.bincount(
                cells[inside], weights=ensemble.v[inside, j], minlength=mesh.size
            )
            for j in range(ensemble.dim)
        ],
        axis=-1,
    )
    return VectorField(mesh, values * ensemble.weight / mesh.volumes[:, None])


@dataclass(frozen=True)
class BoundaryFlux:
    """Outward normal current through the boundary faces of the outer cells."""

    value: float
    standard_error: float

    @property
    def z_score(self) -> float:
        return self.value / self.standard_error if self.standard_error > 0 else 0.0


def boundary_flux(ensemble: ParticleEnsemble, mesh: Mesh) -> BoundaryFlux:
    """Σ over outer cells of (j·n)·face area.

    The Monte Carlo standard error comes from the per-particle terms.
    """
    cells = _locate(ensemble, mesh)
    outer = np.isin(cells, mesh.outer_cells)
    x, v = ensemble.x[outer], ensemble.v[outer]
    radius = np.linalg.norm(x, axis=-1)
    normal = x / np.where(radius > 0, radius, 1.0)[:, None]
    scale = ensemble.weight * mesh.outer_face_area / mesh.volumes[cells[outer]]
    terms = scale * np.sum(v * normal, axis=-1)
    total = float(terms.sum())
    variance = max(float(np.sum(terms**2)) - total**2 / ensemble.size, 0.0)
    return BoundaryFlux(total, math.sqrt(variance))


def maxwellian_deviation(
    ensemble: ParticleEnsemble, order: int = MAX_MOMENT_ORDER
) -> float:
    """√Σ c_α² over the normalized velocity Hermite moments of orders 1..`order`.

    Zero in expectation, up to the noise floor √(M/N), when f = ρ·M.
    """
    coefficients = hermite_coefficients(ensemble.v, order)
    return math.sqrt(sum(c * c for c in coefficients.values()))


def weighted_energy(
    ensemble: ParticleEnsemble, mesh: Mesh, order: int = MAX_MOMENT_ORDER
) -> float:
    """Surrogate of ∬|f|²/M: Σ ρ_cell²·|cell| plus the Maxwellian deviation.

    The first term is the spatial L² energy of the histogram; the second
    vanishes, up to its noise floor, once the velocities are Maxwellian.
    """
    rho = density(ensemble, mesh)
    spatial = float(np.sum(rho.values**2 * mesh.volumes))
    return spatial + maxwellian_deviation(ensemble, order)


@dataclass(frozen=True)
class Diagnostics:
    """Observables of one ensemble snapshot."""

    t: float
    mass: float
    particles: int
    velocity_variance: float
    """Mean over components of the empirical velocity variance."""
    deviation: float
    energy: float
    flux: float
    flux_error: float

    @staticmethod
    def measure(
        ensemble: ParticleEnsemble, mesh: Mesh, order: int = MAX_MOMENT_ORDER
    ) -> "Diagnostics":
        rho = density(ensemble, mesh)
        deviation = maxwellian_deviation(ensemble, order)
        flux = boundary_flux(ensemble, mesh)
        return Diagnostics(
            t=ensemble.t,
            mass=rho.integral(),
            particles=ensemble.size,
            velocity_variance=float(ensemble.velocity_variance().mean()),
            deviation=deviation,
            energy=weighted_energy(ensemble, mesh, order),
            flux=flux.value,
            flux_error=flux.standard_error,
        )

    @classmethod
    def __table_fields__(cls) -> TableFields:
        yield "t", lambda d: f"{d.t:.4f}"
        yield "Mass", lambda d: f"{d.mass:.12g}"
        yield "Var(v)", lambda d: f"{d.velocity_variance:.4f}"
        yield "Deviation", lambda d: f"{d.deviation:.4e}"
        yield "Energy", lambda d: f"{d.energy:.4e}"
        yield "Boundary flux", lambda d: f"{d.flux:.3e} ± {d.flux_error:.1e}"
