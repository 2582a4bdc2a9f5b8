"""Particle ensembles of the scaled kinetic Fokker-Planck dynamics.

Each particle follows

    dX = V/ε dt,    dV = −V/ε² dt + √2/ε dW,

with specular reflection at the boundary. A step of length dt is a Strang
splitting: an exact Ornstein-Uhlenbeck half step for V, a reflected straight
flight of X along V/ε for the full dt, and a second OU half step.

Random numbers come from one generator per block of BLOCK_SIZE particles,
seeded from (seed, purpose, step, block), so results do not depend on how the
particles are split across workers.
"""

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Literal

import numpy as np

from ..geometry import BOUNDARY_TOLERANCE, Array, Domain, UnitBall
from ..initial import InitialDatum
from ..iter import blocks

logger = logging.getLogger(__name__)

BoundaryMode = Literal["reflecting", "free-space"]
BOUNDARY_MODES: tuple[BoundaryMode, ...] = ("reflecting", "free-space")

BLOCK_SIZE = 4096

MAX_DT_RATIO = 0.25
"""Largest allowed dt/ε²."""

DEFAULT_DT_RATIO = 0.125


class Stream(IntEnum):
    POSITIONS = 0
    VELOCITIES = 1
    NOISE = 2


def block_generator(seed: int, *key: int) -> np.random.Generator:
    """Generator for one block of particles and one use, derived from `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def default_dt(eps: float) -> float:
    return DEFAULT_DT_RATIO * eps**2


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """N equally weighted particles at macroscopic time t."""

    x: Array
    v: Array
    t: float
    eps: float
    seed: int
    mass: float = 1.0
    steps: int = 0
    """Number of steps taken so far; the position in the noise stream."""
    domain: Domain | None = None
    boundary_mode: BoundaryMode = "reflecting"

    class EscapeError(RuntimeError):
        """A particle ended a step outside the domain."""

    def __post_init__(self) -> None:
        if self.x.shape != self.v.shape or self.x.ndim != 2:
            raise ValueError(
                f"Positions {self.x.shape} and velocities {self.v.shape} "
                "must be matching (n, d) arrays"
            )
        if self.eps <= 0:
            raise ValueError(f"ε must be positive, got {self.eps}")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"Unknown boundary mode '{self.boundary_mode}'")
        if self.boundary_mode == "reflecting" and self.domain is None:
            raise ValueError("Reflecting ensembles need a domain")

    @property
    def size(self) -> int:
        return len(self.x)

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def weight(self) -> float:
        return self.mass / self.size

    def velocity_variance(self) -> Array:
        """Componentwise empirical variance of the velocities."""
        return np.asarray(self.v.var(axis=0))

    def merge(self, other: "ParticleEnsemble") -> "ParticleEnsemble":
        """Union of two independent ensembles at the same time; masses add."""
        if other.t != self.t or other.dim != self.dim:
            raise ValueError("Only ensembles of equal time and dimension can be merged")
        return replace(
            self,
            x=np.concatenate([self.x, other.x]),
            v=np.concatenate([self.v, other.v]),
            mass=self.mass + other.mass,
        )


def sample_initial(
    datum: InitialDatum,
    n: int,
    seed: int,
    eps: float,
    domain: Domain | None = None,
    boundary_mode: BoundaryMode = "reflecting",
) -> ParticleEnsemble:
    """Draw `n` particles from ρ₀(x)·M₀(v) at t = 0."""
    if n < 1:
        raise ValueError(f"Need at least one particle, got {n}")
    if boundary_mode == "reflecting":
        domain = domain or UnitBall(datum.dim)
        if datum.kind == "gaussian":
            raise ValueError("The untruncated gaussian datum is for free-space runs")
    x = np.empty((n, datum.dim))
    v = np.empty((n, datum.dim))
    for index, rows in blocks(n, BLOCK_SIZE):
        count = rows.stop - rows.start
        positions = block_generator(seed, Stream.POSITIONS, index)
        velocities = block_generator(seed, Stream.VELOCITIES, index)
        x[rows] = datum.sample_positions(positions, count, domain)
        v[rows] = datum.sample_velocities(velocities, count)
    logger.debug(f"Sampled {n} particles from {datum.kind} datum with seed {seed}")
    return ParticleEnsemble(x, v, 0.0, eps, seed, datum.mass, 0, domain, boundary_mode)


def ou_half_step(ensemble: ParticleEnsemble, v: Array, dt: float, half: int) -> Array:
    """Exact OU update over dt/2: v·e^(−dt/2ε²) + √(1 − e^(−dt/ε²))·ξ."""
    decay = math.exp(-dt / (2 * ensemble.eps**2))
    spread = math.sqrt(-math.expm1(-dt / ensemble.eps**2))
    noise = np.empty_like(v)
    for index, rows in blocks(len(v), BLOCK_SIZE):
        rng = block_generator(ensemble.seed, Stream.NOISE, ensemble.steps, half, index)
        noise[rows] = rng.standard_normal((rows.stop - rows.start, v.shape[1]))
    return np.asarray(decay * v + spread * noise)


def transport(
    ensemble: ParticleEnsemble, x: Array, v: Array, dt: float
) -> tuple[Array, Array]:
    """Straight flight along v/ε for time dt.

    Reflecting mode bounces specularly off the boundary.
    """
    if ensemble.boundary_mode == "free-space":
        return x + v * (dt / ensemble.eps), v
    assert ensemble.domain is not None
    lengths = np.linalg.norm(v, axis=-1) * (dt / ensemble.eps)
    x, v = ensemble.domain.advance(x, v, lengths)
    overshoot = float(np.max(ensemble.domain.zeta(x), initial=-np.inf))
    if overshoot > BOUNDARY_TOLERANCE:
        raise ParticleEnsemble.EscapeError(
            f"A particle left the domain at t = {ensemble.t}: ζ = {overshoot:.3e}"
        )
    return x, v


def step(ensemble: ParticleEnsemble, dt: float) -> ParticleEnsemble:
    """Advance the ensemble by one Strang-split step of length dt."""
    if dt <= 0:
        raise ValueError(f"Time step must be positive, got {dt}")
    if dt > MAX_DT_RATIO * ensemble.eps**2 * (1 + 1e-12):
        raise ValueError(
            f"Time step {dt} does not resolve the OU time scale "
            f"ε² = {ensemble.eps**2}; need dt ≤ ε²/4"
        )
    v = ou_half_step(ensemble, ensemble.v, dt, 0)
    x, v = transport(ensemble, ensemble.x, v, dt)
    v = ou_half_step(ensemble, v, dt, 1)
    return replace(ensemble, x=x, v=v, t=ensemble.t + dt, steps=ensemble.steps + 1)


def step_count(duration: float, dt: float) -> int:
    """Number of equal steps of length at most dt covering `duration`."""
    return max(1, math.ceil(duration / dt - 1e-9))


def evolve(
    ensemble: ParticleEnsemble,
    t_end: float,
    dt: float | None = None,
    every: int | None = None,
) -> Iterator[ParticleEnsemble]:
    """Step from ensemble.t to t_end.

    Yields the start, every `every`-th state and the final one. The requested
    dt is shrunk so that a whole number of steps ends exactly at t_end.
    """
    duration = t_end - ensemble.t
    if duration < 0:
        raise ValueError(
            f"End time {t_end} precedes the ensemble time {ensemble.t}"
        )
    yield ensemble
    if duration == 0:
        return
    n = step_count(duration, dt or default_dt(ensemble.eps))
    effective = duration / n
    logger.debug(
        f"Evolving {ensemble.size} particles at ε = {ensemble.eps} "
        f"over {n} steps of {effective:.3e}"
    )
    for i in range(1, n + 1):
        ensemble = step(ensemble, effective)
        if i == n:
            # Land exactly on t_end.
            yield replace(ensemble, t=t_end)
        elif every and i % every == 0:
            yield ensemble
