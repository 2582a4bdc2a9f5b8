"""Specular cycles and the end-point map.

A specular cycle is the broken straight-line path of total length |v₀| that
starts at x₀ with direction v₀ and reflects specularly off the boundary. Its
final position is the end-point η(x₀, v₀).

Cycles are stored by cumulative path length along the flight; the
dimensionless breakpoints τ_i are path lengths divided by |v₀|.

Two solvers are provided: a generic segment-by-segment solver built on
`Domain.ray_exit`/`Domain.reflect`, and a closed-form solver for the unit disk
(and the unit ball, reduced to the plane of the trajectory).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from .geometry import (
    BOUNDARY_TOLERANCE,
    GRAZING_TOLERANCE,
    Array,
    BoundaryClass,
    Domain,
    UnitBall,
    as_vector,
)

logger = logging.getLogger(__name__)

MAX_REFLECTIONS = 10**6
"""Reflection cap for the generic solver."""

NEAR_GRAZING = 1e-8
"""Threshold on |v̂·n| at the first hit below which a cycle is flagged near-grazing."""


@dataclass(frozen=True, eq=False)
class SpecularCycle:
    """Broken constant-speed trajectory of one phase point."""

    x0: Array
    v0: Array
    near_grazing: bool

    class GrazingError(ValueError):
        """The cycle starts tangent to the boundary, where η is undefined."""

    class RunawayError(RuntimeError):
        """The cycle needed more reflections than the solver allows."""

    @property
    def reflection_count(self) -> int:
        raise NotImplementedError

    @property
    def path_lengths(self) -> Array:
        """Cumulative path length at each breakpoint, starting with 0."""
        raise NotImplementedError

    @property
    def velocities(self) -> Array:
        """Segment velocities w_0 … w_N, each of norm |v₀|."""
        raise NotImplementedError

    @property
    def reflection_points(self) -> Array:
        """Boundary points x(τ_1) … x(τ_N)."""
        raise NotImplementedError

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v0))

    @property
    def breakpoints(self) -> Array:
        """Dimensionless breakpoints τ_0 = 0 ≤ τ_1 ≤ … ≤ τ_N ≤ 1."""
        speed = self.speed
        return self.path_lengths / speed if speed else np.zeros(1)

    @property
    def endpoint(self) -> Array:
        """η = x(τ_N) + (1 − τ_N)·w_N."""
        if not self.reflection_count:
            return self.x0 + self.v0
        tau = self.breakpoints[-1]
        return self.reflection_points[-1] + (1 - tau) * self.velocities[-1]

    def segment_start(self, i: int) -> Array:
        return self.x0 if i == 0 else self.reflection_points[i - 1]

    def to_json(self, max_points: int | None = None) -> dict[str, Any]:
        """JSON-compatible description.

        Long cycles are truncated to `max_points` breakpoints.
        """
        count = self.reflection_count
        shown = count if max_points is None else min(count, max_points)
        return {
            "x0": self.x0.tolist(),
            "v0": self.v0.tolist(),
            "reflection_count": count,
            "near_grazing": self.near_grazing,
            "breakpoints": self.breakpoints[: shown + 1].tolist(),
            "path_lengths": self.path_lengths[: shown + 1].tolist(),
            "velocities": self.velocities[: shown + 1].tolist(),
            "reflection_points": self.reflection_points[:shown].tolist(),
            "truncated": shown < count,
            "eta": self.endpoint.tolist(),
        }


@dataclass(frozen=True, eq=False)
class MarchedCycle(SpecularCycle):
    """A cycle with every segment stored explicitly."""

    marched_lengths: Array
    marched_velocities: Array
    marched_points: Array

    @property
    def reflection_count(self) -> int:
        return len(self.marched_points)

    @property
    def path_lengths(self) -> Array:
        return self.marched_lengths

    @property
    def velocities(self) -> Array:
        return self.marched_velocities

    @property
    def reflection_points(self) -> Array:
        return self.marched_points


@dataclass(frozen=True)
class EndpointResult:
    eta: Array
    cycle: SpecularCycle
    path_length: float
    """Total path length, equal to |v₀|."""

    @property
    def reflection_count(self) -> int:
        return self.cycle.reflection_count

    @property
    def near_grazing(self) -> bool:
        return self.cycle.near_grazing


def specular_cycle(
    domain: Domain, x0: Any, v0: Any, max_reflections: int = MAX_REFLECTIONS
) -> SpecularCycle:
    """March the cycle of (x₀, v₀) segment by segment through `domain`."""
    x0 = as_vector(x0, domain.dim)
    v0 = as_vector(v0, domain.dim)
    if float(domain.zeta(x0)) > BOUNDARY_TOLERANCE:
        raise ValueError(f"Start point {x0} lies outside the domain")
    speed = float(np.linalg.norm(v0))
    lengths = [0.0]
    velocities = [v0]
    points: list[Array] = []
    if speed == 0:
        return MarchedCycle(
            x0,
            v0,
            False,
            np.array(lengths),
            np.array(velocities),
            np.zeros((0, domain.dim)),
        )

    direction = v0 / speed
    x = x0
    travelled = 0.0
    near_grazing = False
    if domain.on_boundary(x0):
        boundary_class = domain.classify(x0, direction)
        match boundary_class.kind:
            case BoundaryClass.Kind.GRAZING:
                raise SpecularCycle.GrazingError(
                    f"Grazing start at {x0} with velocity {v0}"
                )
            case BoundaryClass.Kind.OUTGOING:
                # Outgoing starts reflect immediately, at τ = 0.
                near_grazing = abs(boundary_class.value) < NEAR_GRAZING
                direction = domain.reflect(x0, direction)
                points.append(x0)
                lengths.append(0.0)
                velocities.append(direction * speed)

    while True:
        s, exit_point = domain.ray_exit(x, direction)
        if s > speed - travelled:
            break
        travelled += s
        x = domain.project_to_boundary(exit_point)
        if not points:
            incidence = abs(float(direction @ domain.normal_at(x)))
            near_grazing = incidence < NEAR_GRAZING
        direction = domain.reflect(x, direction)
        direction /= np.linalg.norm(direction)
        points.append(x)
        lengths.append(travelled)
        velocities.append(direction * speed)
        if len(points) > max_reflections:
            raise SpecularCycle.RunawayError(
                f"More than {max_reflections} reflections "
                f"from {x0} with velocity {v0}"
            )

    return MarchedCycle(
        x0,
        v0,
        near_grazing,
        np.array(lengths),
        np.array(velocities),
        np.array(points).reshape(-1, domain.dim),
    )


def endpoint(domain: Domain, x0: Any, v0: Any) -> EndpointResult:
    """End-point η(x₀, v₀) computed with the generic solver."""
    cycle = specular_cycle(domain, x0, v0)
    return EndpointResult(cycle.endpoint, cycle, cycle.speed)


def reflection_count(domain: Domain, x0: Any, v0: Any) -> int:
    """Number of reflections N in the cycle of (x₀, v₀)."""
    if isinstance(domain, UnitBall):
        return disk_cycle(x0, v0).reflection_count
    return specular_cycle(domain, x0, v0).reflection_count


def rotate(angle: Array, vector: Array) -> Array:
    """Rotate rows of 2-vectors by the matching angles."""
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    a, b = vector[..., 0], vector[..., 1]
    return np.stack([c * a - s * b, s * a + c * b], axis=-1)


@dataclass(frozen=True)
class ChordTerms:
    """Constants of motion of planar flights in the unit disk.

    For a line x + s·u with |u| = 1: b = x·u, m = x × u, q = √(1 − m²) is half
    the chord length, `first_hit` is the distance to the first boundary hit and
    `turn` = π − 2·atan2(m, q) is the signed rotation of the direction at each
    reflection.
    """

    b: Array
    m: Array
    q: Array
    first_hit: Array
    turn: Array

    @property
    def chord(self) -> Array:
        return 2 * self.q

    @staticmethod
    def compute(x: Array, u: Array) -> "ChordTerms":
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        b = x[..., 0] * u[..., 0] + x[..., 1] * u[..., 1]
        m = x[..., 0] * u[..., 1] - x[..., 1] * u[..., 0]
        depth = np.maximum(1.0 - (x[..., 0] ** 2 + x[..., 1] ** 2), 0.0)
        q = np.sqrt(b * b + depth)
        with np.errstate(divide="ignore", invalid="ignore"):
            first_hit = np.where(b <= 0, q - b, depth / (b + q))
        first_hit = np.where(np.isfinite(first_hit), first_hit, 0.0)
        turn = np.pi - 2 * np.arctan2(m, q)
        return ChordTerms(b, m, q, first_hit, turn)


def plane_basis(x0: Array, v0: Array) -> Array:
    """Orthonormal d×2 basis of a plane containing x₀ and v₀.

    In 2-D this is the identity. In 3-D the first column is v̂₀ and the second
    the normalized part of x₀ orthogonal to it (any orthogonal unit vector when
    x₀ ∥ v₀).
    """
    dim = len(x0)
    if dim == 2:
        return np.eye(2)
    e1 = v0 / np.linalg.norm(v0)
    rest = x0 - (x0 @ e1) * e1
    if np.linalg.norm(rest) <= 1e-12 * max(1.0, float(np.linalg.norm(x0))):
        rest = np.eye(dim)[int(np.argmin(np.abs(e1)))]
        rest = rest - (rest @ e1) * e1
    e2 = rest / np.linalg.norm(rest)
    return np.stack([e1, e2], axis=-1)


@dataclass(frozen=True, eq=False)
class DiskCycle(SpecularCycle):
    """Closed-form cycle in the unit disk or ball.

    Only the chord constants are stored; breakpoints, velocities and
    reflection points are materialized on first access, so arbitrarily long
    cycles cost no memory until inspected.
    """

    basis: Array
    x_plane: Array
    u_plane: Array
    terms: ChordTerms
    count: int
    eta: Array

    @property
    def reflection_count(self) -> int:
        return self.count

    @property
    def endpoint(self) -> Array:
        return self.eta

    @cached_property
    def path_lengths(self) -> Array:
        s1, chord = float(self.terms.first_hit), float(self.terms.chord)
        return np.concatenate([[0.0], s1 + chord * np.arange(self.count)])

    @cached_property
    def velocities(self) -> Array:
        turns = float(self.terms.turn) * np.arange(self.count + 1)
        directions = rotate(turns, np.broadcast_to(self.u_plane, (self.count + 1, 2)))
        return self.speed * directions @ self.basis.T

    @cached_property
    def reflection_points(self) -> Array:
        first = self.x_plane + float(self.terms.first_hit) * self.u_plane
        first = first / np.linalg.norm(first)
        turns = float(self.terms.turn) * np.arange(self.count)
        starts = np.broadcast_to(first, (self.count, 2))
        return np.asarray(rotate(turns, starts) @ self.basis.T)


def disk_cycle(x0: Any, v0: Any) -> DiskCycle:
    """Closed-form cycle of (x₀, v₀) in the unit disk.

    The unit ball reduces to the disk through the trajectory plane.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    dim = len(x0)
    x0 = as_vector(x0, dim)
    v0 = as_vector(v0, dim)
    if (zeta := float(x0 @ x0) - 1.0) > BOUNDARY_TOLERANCE:
        raise ValueError(f"Start point {x0} lies outside the unit ball")
    speed = float(np.linalg.norm(v0))
    if speed == 0:
        return _disk_cycle_at_rest(x0, v0)
    basis = plane_basis(x0, v0)
    x_plane = x0 @ basis
    u_plane = (v0 / speed) @ basis
    terms = ChordTerms.compute(x_plane, u_plane)
    if abs(zeta) <= BOUNDARY_TOLERANCE and abs(float(terms.b)) <= GRAZING_TOLERANCE:
        raise SpecularCycle.GrazingError(
            f"Grazing start at {x0} with velocity {v0}"
        )

    s1, chord, turn = float(terms.first_hit), float(terms.chord), float(terms.turn)
    near_grazing = float(terms.q) < NEAR_GRAZING
    if speed < s1:
        return DiskCycle(
            x0, v0, near_grazing, basis, x_plane, u_plane, terms, 0, x0 + v0
        )
    full_chords = int(np.floor((speed - s1) / chord)) if chord > 0 else 0
    remainder = speed - s1 - full_chords * chord
    first = x_plane + s1 * u_plane
    first = first / np.linalg.norm(first)
    last = rotate(full_chords * turn, first)
    direction = rotate((full_chords + 1) * turn, u_plane)
    eta = (last + remainder * direction) @ basis.T
    return DiskCycle(
        x0,
        v0,
        near_grazing,
        basis,
        x_plane,
        u_plane,
        terms,
        full_chords + 1,
        eta,
    )


def _disk_cycle_at_rest(x0: Array, v0: Array) -> DiskCycle:
    zero = np.zeros(())
    terms = ChordTerms(zero, zero, zero, zero, zero)
    basis = np.eye(len(x0))[:, :2]
    return DiskCycle(x0, v0, False, basis, x0[:2], np.zeros(2), terms, 0, x0 + v0)


def disk_endpoint_analytic(x0: Any, v0: Any) -> EndpointResult:
    """End-point in the unit disk/ball by chord arithmetic instead of marching."""
    cycle = disk_cycle(x0, v0)
    return EndpointResult(cycle.endpoint, cycle, cycle.speed)


def disk_endpoint_batch(x: Array, v: Array) -> tuple[Array, Array]:
    """Vectorized planar end-points for rows of 2-D phase points.

    Returns (η, reflection counts). Grazing boundary starts are not detected
    here; callers pass interior points.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    speed = np.linalg.norm(v, axis=-1)
    moving = speed > 0
    u = np.where(moving[:, None], v / np.where(moving, speed, 1.0)[:, None], 0.0)
    terms = ChordTerms.compute(x, u)
    chord = terms.chord
    reflected = moving & (speed >= terms.first_hit) & (chord > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_chord = np.where(chord > 0, chord, 1.0)
        chords_run = np.floor((speed - terms.first_hit) / safe_chord)
        full_chords = np.where(reflected, chords_run, 0.0)
    remainder = speed - terms.first_hit - full_chords * chord
    first = x + terms.first_hit[:, None] * u
    first /= np.maximum(np.linalg.norm(first, axis=-1, keepdims=True), 1e-300)
    last = rotate(full_chords * terms.turn, first)
    direction = rotate((full_chords + 1) * terms.turn, u)
    eta = np.where(reflected[:, None], last + remainder[:, None] * direction, x + v)
    counts = np.where(reflected, full_chords + 1, 0).astype(np.int64)
    return eta, counts
