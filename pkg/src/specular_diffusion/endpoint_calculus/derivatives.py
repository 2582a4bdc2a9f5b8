"""Velocity derivatives of the end-point map: J = ∇_vη and Δ_vη.

In the unit disk the end-point has the closed form

    η = Rot(kθ)·P + r·Rot((k+1)θ)·u,

with u = v/|v|, P the first boundary hit, θ the per-reflection turn, k the
number of full chords and r the leftover path length. Writing
v = S(cos α, sin α), everything but r depends on α alone, so the derivatives
follow from α-derivatives of the chord constants, assembled as

    J = η_S ⊗ u + (η_α/S) ⊗ u⊥,    Δ_vη = η_S/S + η_αα/S².

The unit ball in 3-D reduces to this planar problem through cylindrical
coordinates about the axis x/|x|. Other domains get an analytic Jacobian for
single-reflection cycles and central finite differences otherwise.
"""

import logging
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from ..billiards import (
    ChordTerms,
    SpecularCycle,
    disk_cycle,
    rotate,
    specular_cycle,
)
from ..geometry import Array, Domain, UnitBall, as_vector

logger = logging.getLogger(__name__)

Mode = Literal["analytic", "finite-difference"]

MIN_STEP = 1e-7
MAX_STEP = 1e-4
GAP_FACTOR = 10
"""A step h needs at least GAP_FACTOR·h of clearance from a breakpoint."""

AXIS_TOLERANCE = 1e-6
"""Relative distance of v from the axis x/|x| below which the 3-D reduction is
avoided."""


@dataclass(frozen=True, eq=False)
class EndpointDerivatives:
    eta: Array
    jacobian: Array
    """J = ∇_vη, a d×d matrix; row i holds the gradient of η_i."""
    laplacian: Array
    """Δ_vη, one entry per component of η."""
    reflection_count: int
    near_grazing: bool = False

    class DiscontinuityError(ValueError):
        """A difference stencil would straddle a change in reflection count."""

        def __init__(self, message: str, tau: float) -> None:
            super().__init__(message)
            self.tau = tau


def _perp(a: Array) -> Array:
    return np.stack([-a[..., 1], a[..., 0]], axis=-1)


def disk_derivatives_batch(
    x: Array, v: Array
) -> tuple[Array, Array, Array, Array]:
    """Closed-form (η, J, Δ_vη, N) for rows of planar phase points in the disk.

    Rows without reflections get J = I and Δ_vη = 0. At a breakpoint the
    one-sided formula with the larger reflection count is used.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = len(x)
    speed = np.linalg.norm(v, axis=-1)
    moving = speed > 0
    safe_speed = np.where(moving, speed, 1.0)
    u = v / safe_speed[:, None]
    u_perp = _perp(u)
    t = ChordTerms.compute(x, u)
    b, m, q, s1, turn = t.b, t.m, t.q, t.first_hit, t.turn
    chord = 2 * q
    reflected = moving & (speed >= s1) & (chord > 0)
    safe_chord = np.where(chord > 0, chord, 1.0)
    k = np.where(reflected, np.floor((speed - s1) / safe_chord), 0.0)
    r = speed - s1 - k * chord

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_q = np.where(q > 0, 1 / q, 0.0)
        q1 = -m * b * inv_q
        q2 = -(b * b - m * m) * inv_q - (m * b) ** 2 * inv_q**3
        s1_1 = m + q1
        s1_2 = b + q2
        turn_1 = -2 * b * inv_q
        turn_2 = 2 * m * inv_q - 2 * m * b * b * inv_q**3
    chord_1, chord_2 = 2 * q1, 2 * q2
    r_1 = -s1_1 - k * chord_1
    r_2 = -s1_2 - k * chord_2

    p = x + s1[:, None] * u
    p_1 = s1_1[:, None] * u + s1[:, None] * u_perp
    p_2 = s1_2[:, None] * u + 2 * s1_1[:, None] * u_perp - s1[:, None] * u

    a1p = rotate(k * turn, p)
    a1p_1 = rotate(k * turn, p_1)
    a1p_2 = rotate(k * turn, p_2)
    w = rotate((k + 1) * turn, u)
    a2u_perp = rotate((k + 1) * turn, u_perp)
    c = 1 + (k + 1) * turn_1
    w_1 = c[:, None] * a2u_perp
    w_2 = ((k + 1) * turn_2)[:, None] * a2u_perp - (c * c)[:, None] * w

    kt1 = (k * turn_1)[:, None]
    kt2 = (k * turn_2)[:, None]
    eta = a1p + r[:, None] * w
    eta_s = w
    eta_a = kt1 * _perp(a1p) + a1p_1 + r_1[:, None] * w + r[:, None] * w_1
    eta_aa = (
        kt2 * _perp(a1p)
        - kt1 * kt1 * a1p
        + 2 * kt1 * _perp(a1p_1)
        + a1p_2
        + r_2[:, None] * w
        + 2 * r_1[:, None] * w_1
        + r[:, None] * w_2
    )
    eta_a_scaled = eta_a / safe_speed[:, None]
    jacobian = (
        eta_s[:, :, None] * u[:, None, :]
        + eta_a_scaled[:, :, None] * u_perp[:, None, :]
    )
    laplacian = eta_s / safe_speed[:, None] + eta_aa / safe_speed[:, None] ** 2

    identity = np.broadcast_to(np.eye(2), (n, 2, 2))
    eta = np.where(reflected[:, None], eta, x + v)
    jacobian = np.where(reflected[:, None, None], jacobian, identity)
    laplacian = np.where(reflected[:, None], laplacian, 0.0)
    counts = np.where(reflected, k + 1, 0).astype(np.int64)
    return eta, jacobian, laplacian, counts


def ball_derivatives_batch(
    x: Array, v: Array
) -> tuple[Array, Array, Array, Array]:
    """Closed-form (η, J, Δ_vη, N) for rows of phase points in the unit ball.

    In 3-D, velocity space is described in cylindrical coordinates (a, ρ, γ)
    about the axis f = x/|x|; η = A(a, ρ)·f + B(a, ρ)·e_ρ(γ) where (A, B) is
    the planar end-point of the start (|x|, 0) with velocity (a, ρ). Rows whose
    velocity is (anti)parallel to x are evaluated by finite differences.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if x.shape[-1] == 2:
        return disk_derivatives_batch(x, v)

    n = len(x)
    radius = np.linalg.norm(x, axis=-1)
    speed = np.linalg.norm(v, axis=-1)
    safe_radius = np.where(radius > 0, radius, 1.0)
    axis = np.where(radius[:, None] > 0, x / safe_radius[:, None], 0.0)
    # At the centre any axis orthogonal to v works.
    at_center = radius == 0
    if at_center.any():
        centred = v[at_center]
        helper = np.eye(3)[np.argmin(np.abs(centred), axis=-1)]
        fallback = np.cross(centred, helper)
        length = np.linalg.norm(fallback, axis=-1, keepdims=True)
        axis[at_center] = fallback / np.maximum(length, 1e-300)
    along = np.sum(v * axis, axis=-1)
    across = v - along[:, None] * axis
    rho = np.linalg.norm(across, axis=-1)
    degenerate = (rho <= AXIS_TOLERANCE * speed) & (speed > 0)
    e_rho = across / np.where(rho > 0, rho, 1.0)[:, None]
    e_gamma = np.cross(axis, e_rho)

    planar_x = np.stack([radius, np.zeros(n)], axis=-1)
    planar_v = np.stack([along, rho], axis=-1)
    eta_p, jac_p, lap_p, counts = disk_derivatives_batch(planar_x, planar_v)

    big_a, big_b = eta_p[:, 0], eta_p[:, 1]
    safe_rho = np.where(rho > 0, rho, 1.0)
    eta = big_a[:, None] * axis + big_b[:, None] * e_rho
    d_along = jac_p[:, 0, 0][:, None] * axis + jac_p[:, 1, 0][:, None] * e_rho
    d_rho = jac_p[:, 0, 1][:, None] * axis + jac_p[:, 1, 1][:, None] * e_rho
    jacobian = (
        d_along[:, :, None] * axis[:, None, :]
        + d_rho[:, :, None] * e_rho[:, None, :]
        + (big_b / safe_rho)[:, None, None]
        * e_gamma[:, :, None]
        * e_gamma[:, None, :]
    )
    lap_a = lap_p[:, 0] + jac_p[:, 0, 1] / safe_rho
    lap_b = lap_p[:, 1] + jac_p[:, 1, 1] / safe_rho - big_b / safe_rho**2
    laplacian = lap_a[:, None] * axis + lap_b[:, None] * e_rho

    reflected = counts > 0
    eta = np.where(reflected[:, None], eta, x + v)
    jacobian = np.where(reflected[:, None, None], jacobian, np.eye(3))
    laplacian = np.where(reflected[:, None], laplacian, 0.0)

    for i in np.flatnonzero(degenerate & reflected):
        fallback_result = _finite_difference(UnitBall(3), x[i], v[i])
        eta[i] = fallback_result.eta
        jacobian[i] = fallback_result.jacobian
        laplacian[i] = fallback_result.laplacian
    return eta, jacobian, laplacian, counts


def endpoint_derivatives(
    domain: Domain, x: Any, v: Any, mode: Mode = "analytic"
) -> EndpointDerivatives:
    """η, ∇_vη and Δ_vη at the phase point (x, v)."""
    x = as_vector(x, domain.dim)
    v = as_vector(v, domain.dim)
    match mode:
        case "finite-difference":
            return _finite_difference(domain, x, v)
        case "analytic":
            pass
        case _:
            raise ValueError(f"Unknown derivative mode: {mode}")

    if isinstance(domain, UnitBall):
        cycle = disk_cycle(x, v)
        if cycle.reflection_count == 0:
            return _free_flight(x, v, cycle)
        _, jacobian, laplacian, _ = ball_derivatives_batch(x[None, :], v[None, :])
        return EndpointDerivatives(
            cycle.endpoint,
            jacobian[0],
            laplacian[0],
            cycle.reflection_count,
            cycle.near_grazing,
        )

    cycle = specular_cycle(domain, x, v)
    match cycle.reflection_count:
        case 0:
            return _free_flight(x, v, cycle)
        case 1:
            return _single_reflection(domain, x, v, cycle)
    return _finite_difference(domain, x, v, cycle)


def _free_flight(x: Array, v: Array, cycle: SpecularCycle) -> EndpointDerivatives:
    dim = len(x)
    return EndpointDerivatives(
        x + v, np.eye(dim), np.zeros(dim), 0, cycle.near_grazing
    )


def _single_reflection_jacobian(
    domain: Domain, x: Array, v: Array
) -> tuple[Array, Array]:
    """η and ∇_vη for a cycle with exactly one reflection.

    With t the flight time to the hit point P = x + t·v, g = ∇ζ(P) and R the
    reflection at P, η = P + (1 − t)·R·v; implicit differentiation of
    ζ(x + t·v) = 0 gives dt = −t·(g·dv)/(g·v).
    """
    dim = len(x)
    identity = np.eye(dim)
    if domain.on_boundary(x) and float(v @ domain.normal_at(x)) > 0:
        time, hit = 0.0, x
    else:
        s, hit = domain.ray_exit(x, v)
        time = s
        hit = domain.project_to_boundary(hit)
    g = domain.gradient(hit)
    g_norm = float(np.linalg.norm(g))
    normal = g / g_norm
    reflection = identity - 2 * np.outer(normal, normal)
    reflected_v = reflection @ v
    dt = -time * g / float(g @ v)
    d_hit = time * identity + np.outer(v, dt)
    tangential = identity - np.outer(normal, normal)
    d_normal = tangential @ domain.hessian(hit) @ d_hit / g_norm
    d_reflection_v = -2 * (
        np.outer(normal, v @ d_normal) + float(normal @ v) * d_normal
    )
    jacobian = (
        d_hit
        - np.outer(reflected_v, dt)
        + (1 - time) * (reflection + d_reflection_v)
    )
    eta = hit + (1 - time) * reflected_v
    return eta, jacobian


def _single_reflection(
    domain: Domain, x: Array, v: Array, cycle: SpecularCycle
) -> EndpointDerivatives:
    """Analytic Jacobian; the Laplacian is its divergence by central differences."""
    h = _step(domain, x, v, cycle)
    dim = len(x)
    eta, jacobian = _single_reflection_jacobian(domain, x, v)
    laplacian = np.zeros(dim)
    for j in range(dim):
        step = np.zeros(dim)
        step[j] = h
        _, forward = _single_reflection_jacobian(domain, x, v + step)
        _, backward = _single_reflection_jacobian(domain, x, v - step)
        laplacian += (forward[:, j] - backward[:, j]) / (2 * h)
    return EndpointDerivatives(
        cycle.endpoint, jacobian, laplacian, 1, cycle.near_grazing
    )


def _breakpoint_gap(domain: Domain, cycle: SpecularCycle) -> tuple[float, float]:
    """Distance in path length to the nearest breakpoint, and that breakpoint's τ.

    The candidates are the last reflection and the boundary hit that one more
    unit of path length would reach.
    """
    speed = cycle.speed
    last = float(cycle.path_lengths[-1])
    since_last = speed - last
    eta = cycle.endpoint
    direction = cycle.velocities[-1] / speed
    if float(domain.zeta(eta)) >= 0:
        until_next = 0.0
    else:
        until_next, _ = domain.ray_exit(eta, direction)
    if cycle.reflection_count and since_last <= until_next:
        return since_last, last / speed
    return until_next, (speed + until_next) / speed


def _step(domain: Domain, x: Array, v: Array, cycle: SpecularCycle) -> float:
    gap, tau = _breakpoint_gap(domain, cycle)
    amplification = 1 + cycle.reflection_count
    h = min(MAX_STEP, max(MIN_STEP, gap / (20 * amplification)))
    if gap < GAP_FACTOR * h * amplification:
        raise EndpointDerivatives.DiscontinuityError(
            f"Breakpoint at τ={tau:.12g} lies within {gap:.3e} of the evaluation point",
            tau,
        )
    return h


def _endpoint(domain: Domain, x: Array, v: Array) -> Array:
    if isinstance(domain, UnitBall):
        return disk_cycle(x, v).endpoint
    return specular_cycle(domain, x, v).endpoint


def _finite_difference(
    domain: Domain, x: Array, v: Array, cycle: SpecularCycle | None = None
) -> EndpointDerivatives:
    """Central differences of η in v, stepped by the gap to the nearest breakpoint."""
    if cycle is None:
        if isinstance(domain, UnitBall):
            cycle = disk_cycle(x, v)
        else:
            cycle = specular_cycle(domain, x, v)
    h = _step(domain, x, v, cycle)
    dim = len(x)
    eta = cycle.endpoint
    jacobian = np.zeros((dim, dim))
    laplacian = np.zeros(dim)
    for j in range(dim):
        step = np.zeros(dim)
        step[j] = h
        forward = _endpoint(domain, x, v + step)
        backward = _endpoint(domain, x, v - step)
        jacobian[:, j] = (forward - backward) / (2 * h)
        laplacian += (forward - 2 * eta + backward) / h**2
    return EndpointDerivatives(
        eta, jacobian, laplacian, cycle.reflection_count, cycle.near_grazing
    )
