"""Finite-volume heat equation ∂ₜρ = Δρ with zero flux through the outer boundary.

The semi-discrete system is V·dρ/dt = −K·ρ, where V holds the cell volumes and
K is the symmetric two-point flux matrix assembled from the mesh faces. Its
columns sum to zero, so every scheme conserves Σ Vᵢρᵢ.
"""

import logging
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, replace
from functools import cached_property
from typing import TYPE_CHECKING, Literal

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..geometry import Array
from ..mesh import Mesh, ScalarField, ball_volume, sphere_area
from .eigenmode import RadialMode

if TYPE_CHECKING:
    from ..initial import InitialDatum

logger = logging.getLogger(__name__)

Scheme = Literal["implicit", "explicit", "crank-nicolson"]
SCHEMES: tuple[Scheme, ...] = ("implicit", "explicit", "crank-nicolson")

QUADRATURE_REFINEMENT = 8


@dataclass(frozen=True, eq=False)
class HeatState:
    field: ScalarField
    t: float

    @property
    def mesh(self) -> Mesh:
        return self.field.mesh

    def mass(self) -> float:
        return self.field.integral()


@dataclass(frozen=True, eq=False)
class HeatOperator:
    """The flux matrix K and volume vector V of a mesh."""

    mesh: Mesh

    @cached_property
    def stiffness(self) -> sparse.csc_matrix:
        faces = self.mesh.faces
        n = self.mesh.size
        owner, neighbour, t = faces.owner, faces.neighbour, faces.transmissibility
        rows = np.concatenate([owner, neighbour, owner, neighbour])
        cols = np.concatenate([owner, neighbour, neighbour, owner])
        values = np.concatenate([t, t, -t, -t])
        matrix = sparse.coo_matrix((values, (rows, cols)), shape=(n, n))
        return sparse.csc_matrix(matrix)

    @property
    def volumes(self) -> Array:
        return self.mesh.volumes

    def explicit_limit(self) -> float:
        """Largest dt for which forward Euler keeps ρ within its initial range."""
        diagonal = self.stiffness.diagonal()
        if not diagonal.any():
            return math.inf
        return float(np.min(self.volumes[diagonal > 0] / diagonal[diagonal > 0]))

    def laplacian(self, values: Array) -> Array:
        """Cell averages of Δρ."""
        return np.asarray(-(self.stiffness @ values) / self.volumes)

    def stepper(self, dt: float, scheme: Scheme) -> Callable[[Array], Array]:
        volume = sparse.diags(self.volumes, format="csc")
        match scheme:
            case "explicit":
                if dt > self.explicit_limit() * (1 + 1e-12):
                    raise ValueError(
                        f"Explicit step dt = {dt} exceeds the stability limit "
                        f"{self.explicit_limit():.3e}"
                    )
                return lambda u: u + dt * self.laplacian(u)
            case "implicit":
                implicit = splu(sparse.csc_matrix(volume + dt * self.stiffness))
                return lambda u: np.asarray(implicit.solve(self.volumes * u))
            case "crank-nicolson":
                implicit = splu(sparse.csc_matrix(volume + dt / 2 * self.stiffness))
                explicit = sparse.csc_matrix(volume - dt / 2 * self.stiffness)
                return lambda u: np.asarray(implicit.solve(explicit @ u))
        raise ValueError(f"Unknown scheme '{scheme}'; expected one of {SCHEMES}")


def heat_steps(
    rho_in: ScalarField,
    t_end: float,
    dt: float,
    scheme: Scheme = "implicit",
    every: int | None = None,
) -> Iterator[HeatState]:
    """Evolve `rho_in` from t = 0 to t_end.

    Yields the start, every `every`-th state and the end.

    dt is shrunk so that a whole number of steps ends exactly at t_end.
    """
    if dt <= 0:
        raise ValueError(f"Time step must be positive, got {dt}")
    if t_end < 0:
        raise ValueError(f"End time must be nonnegative, got {t_end}")
    state = HeatState(rho_in, 0.0)
    yield state
    if t_end == 0:
        return
    n = max(1, math.ceil(t_end / dt - 1e-9))
    effective = t_end / n
    advance = HeatOperator(rho_in.mesh).stepper(effective, scheme)
    logger.debug(
        f"Heat solve on {rho_in.mesh.size} cells: "
        f"{n} {scheme} steps of {effective:.3e}"
    )
    values = rho_in.values
    for i in range(1, n + 1):
        values = advance(values)
        if i == n or (every and i % every == 0):
            t = t_end if i == n else i * effective
            yield HeatState(ScalarField(rho_in.mesh, values), t)


def heat_solve(
    rho_in: ScalarField, t_end: float, dt: float, scheme: Scheme = "implicit"
) -> HeatState:
    """The state at t_end."""
    state = HeatState(rho_in, 0.0)
    for state in heat_steps(rho_in, t_end, dt, scheme):
        pass
    return state


def l2_error(a: ScalarField, b: ScalarField) -> float:
    """√Σ (aᵢ − bᵢ)²·Vᵢ."""
    if a.mesh != b.mesh:
        raise ValueError(f"Fields live on different meshes: {a.mesh} and {b.mesh}")
    return float(np.sqrt(np.sum((a.values - b.values) ** 2 * a.mesh.volumes)))


def _directions(dim: int, count: int) -> Array:
    """Nearly uniform unit vectors.

    Equally spaced angles in 2-D, a Fibonacci lattice in 3-D.
    """
    if dim == 2:
        theta = (np.arange(count) + 0.5) * 2 * np.pi / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    z = 1 - (2 * np.arange(count) + 1) / count
    phi = np.pi * (3 - np.sqrt(5)) * np.arange(count)
    ring = np.sqrt(1 - z * z)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), z], axis=-1)


def cell_averages(
    mesh: Mesh,
    function: Callable[[Array], Array],
    refine: int = QUADRATURE_REFINEMENT,
) -> ScalarField:
    """Cell averages of `function` by a product midpoint rule in (r, θ).

    Uses `refine` points per cell and direction.
    """
    h = mesh.spacing
    offsets = (np.arange(refine) + 0.5) / refine
    averages = np.empty(mesh.size)
    if mesh.dim == 2:
        full_turns = refine * max(mesh.n_theta, 16)
    else:
        full_turns = refine * refine * 16
    full_circle = _directions(mesh.dim, full_turns)
    for cell in range(mesh.size):
        ring, sector = int(mesh.ring[cell]), int(mesh.sector[cell])
        r = (ring + offsets) * h
        if mesh.kind == "radial" or ring == 0:
            directions = full_circle
        else:
            theta = (sector + offsets) * mesh.sector_angle
            directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        points = (r[:, None, None] * directions[None, :, :]).reshape(-1, mesh.dim)
        weights = np.repeat(r ** (mesh.dim - 1), len(directions))
        averages[cell] = float(np.sum(function(points) * weights) / np.sum(weights))
    return ScalarField(mesh, averages)


def project_initial(
    datum: "InitialDatum", mesh: Mesh, refine: int = QUADRATURE_REFINEMENT
) -> ScalarField:
    """Cell averages of the datum's spatial density ρ₀.

    Exact for the uniform and eigenmode data on a unit-radius mesh; midpoint
    quadrature otherwise.
    """
    if datum.dim != mesh.dim:
        raise ValueError(
            f"Datum dimension {datum.dim} does not match mesh dimension {mesh.dim}"
        )
    if mesh.radius == 1.0:
        level = datum.mass / mesh.total_volume
        match datum.kind:
            case "uniform":
                return ScalarField(mesh, np.full(mesh.size, level))
            case "eigenmode":
                h = mesh.spacing
                r0, r1 = mesh.ring * h, (mesh.ring + 1) * h
                shell = ball_volume(mesh.dim, r1) - ball_volume(mesh.dim, r0)
                area = float(sphere_area(mesh.dim, 1.0))
                mode_average = (
                    area * RadialMode(mesh.dim).shell_integral(r0, r1) / shell
                )
                return ScalarField(
                    mesh, level * (1 + datum.amplitude * mode_average)
                )
    return cell_averages(mesh, datum.density, refine)


def free_space_reference(
    datum: "InitialDatum",
    mesh: Mesh,
    t: float,
    refine: int = QUADRATURE_REFINEMENT,
) -> ScalarField:
    """Exact whole-space heat flow of a Gaussian datum at time t, cell-averaged.

    A Gaussian of variance w² per component stays Gaussian with variance w² + 2t.
    """
    if datum.kind != "gaussian":
        raise ValueError(
            f"The free-space reference needs a gaussian datum, got '{datum.kind}'"
        )
    spread = replace(datum, width=math.sqrt(datum.width**2 + 2 * t))
    return cell_averages(mesh, spread.density, refine)


def fitted_decay_rate(states: list[HeatState], mean: float) -> float:
    """Least-squares rate λ of ‖ρ(t) − mean‖ ∝ e^(−λt) over the given states."""
    if len(states) < 2:
        raise ValueError("Need at least two states to fit a decay rate")
    times = np.array([s.t for s in states])
    norms = np.array(
        [
            l2_error(s.field, ScalarField(s.mesh, np.full(s.mesh.size, mean)))
            for s in states
        ]
    )
    slope, _ = np.polyfit(times, np.log(norms), 1)
    return float(-slope)
