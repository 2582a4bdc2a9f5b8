"""Builtin initial data ρ₀(x)·M₀(v) shared by the particle sampler and the heat solver.

Spatial profiles:

- ``uniform``: constant density on the domain.
- ``bump``: a Gaussian of standard deviation ``width`` centred at ``center``,
  truncated to the unit ball.
- ``eigenmode``: ``mass/|Ω|·(1 + amplitude·u(r))`` with u the first radial
  Neumann eigenmode, normalized so u(0) = 1.
- ``gaussian``: an untruncated Gaussian for free-space runs.

Velocities are centred Gaussians of variance ``velocity_variance`` per
component; 1 is the Maxwellian.
"""

import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from scipy import stats

from .geometry import Array, Domain, UnitBall
from .heat.eigenmode import RadialMode

logger = logging.getLogger(__name__)

KINDS = ("uniform", "bump", "eigenmode", "gaussian")


@dataclass(frozen=True)
class InitialDatum:
    kind: str = "bump"
    dim: int = 2
    mass: float = 1.0
    center: tuple[float, ...] = (0.4, 0.0)
    width: float = 0.1
    amplitude: float = 0.5
    velocity_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(
                f"Unknown initial datum '{self.kind}'; expected one of {KINDS}"
            )
        if self.mass <= 0:
            raise ValueError(f"Mass must be positive, got {self.mass}")
        if self.velocity_variance <= 0:
            raise ValueError(
                "Velocity variance must be positive, "
                f"got {self.velocity_variance}"
            )
        if self.kind in ("bump", "gaussian"):
            if self.width <= 0:
                raise ValueError(f"Width must be positive, got {self.width}")
            if len(self.center) != self.dim:
                raise ValueError(
                    f"Center {self.center} does not have dimension {self.dim}"
                )
        if self.kind == "bump" and np.linalg.norm(self.center) >= 1:
            raise ValueError(f"Bump center {self.center} lies outside the unit ball")
        if self.kind == "eigenmode":
            mode = RadialMode(self.dim)
            # Minimum of the mode over [0, 1]; the density must stay nonnegative.
            lowest = float(np.min(mode.profile(np.linspace(0, 1, 2001))))
            if self.amplitude < 0 or self.amplitude * -lowest > 1:
                raise ValueError(
                    f"Eigenmode amplitude {self.amplitude} makes the density negative"
                )

    @staticmethod
    def from_config(config: Mapping[str, Any], dim: int = 2) -> "InitialDatum":
        values = dict(config)
        values.setdefault("dim", dim)
        kind = values.get("kind", "bump")
        if "center" in values:
            values["center"] = tuple(float(c) for c in values["center"])
        elif kind == "gaussian":
            values["center"] = (0.0,) * int(values["dim"])
        elif int(values["dim"]) == 3:
            values["center"] = (0.4, 0.0, 0.0)
        unknown = set(values) - set(InitialDatum.__dataclass_fields__)
        if unknown:
            raise ValueError(f"Unknown initial datum keys: {sorted(unknown)}")
        return InitialDatum(**values)

    def to_config(self) -> dict[str, Any]:
        config = asdict(self)
        config["center"] = list(self.center)
        return config

    @property
    def truncated_mass_fraction(self) -> float:
        """Fraction of the untruncated bump Gaussian inside the unit ball."""
        center = np.asarray(self.center)
        scale = self.width**2
        offset = float(center @ center) / scale
        return float(stats.ncx2.cdf(1 / scale, self.dim, offset))

    def density(self, x: Array) -> Array:
        """ρ₀ at rows of points; zero outside the unit ball for the bounded kinds."""
        x = np.asarray(x, dtype=np.float64)
        r2 = np.sum(x * x, axis=-1)
        inside = r2 <= 1.0
        level = self.mass / UnitBall(self.dim).volume
        match self.kind:
            case "uniform":
                return np.where(inside, level, 0.0)
            case "eigenmode":
                mode = RadialMode(self.dim).profile(np.sqrt(r2))
                return np.where(inside, level * (1 + self.amplitude * mode), 0.0)
            case "bump":
                bump = self._gaussian(x) / self.truncated_mass_fraction
                return np.where(inside, bump, 0.0)
            case _:
                return self._gaussian(x)

    def _gaussian(self, x: Array) -> Array:
        offset = x - np.asarray(self.center)
        norm = (2 * np.pi * self.width**2) ** (-self.dim / 2)
        squared = np.sum(offset * offset, axis=-1)
        return np.asarray(self.mass * norm * np.exp(-squared / (2 * self.width**2)))

    def sample_positions(
        self, rng: np.random.Generator, n: int, domain: Domain | None = None
    ) -> Array:
        """Draw `n` positions from ρ₀/mass.

        The bounded kinds are restricted to `domain`.
        """
        domain = domain or UnitBall(self.dim)
        match self.kind:
            case "gaussian":
                return self._bump_proposal(rng, n, domain)
            case "uniform" if isinstance(domain, UnitBall):
                return uniform_ball(rng, n, self.dim)
            case "bump":
                return self._rejection(rng, n, domain, self._bump_proposal)
            case "eigenmode":
                return self._rejection(
                    rng,
                    n,
                    domain,
                    self._uniform_proposal,
                    self._eigenmode_acceptance,
                )
            case _:
                return self._rejection(rng, n, domain, self._uniform_proposal)

    def _eigenmode_acceptance(self, x: Array) -> Array:
        mode = RadialMode(self.dim).profile(np.linalg.norm(x, axis=-1))
        return np.asarray((1 + self.amplitude * mode) / (1 + self.amplitude))

    def _bump_proposal(
        self, rng: np.random.Generator, n: int, domain: Domain
    ) -> Array:
        noise = rng.standard_normal((n, self.dim))
        return np.asarray(self.center) + self.width * noise

    def _uniform_proposal(
        self, rng: np.random.Generator, n: int, domain: Domain
    ) -> Array:
        return domain.bounding_radius * uniform_ball(rng, n, self.dim)

    def _rejection(
        self,
        rng: np.random.Generator,
        n: int,
        domain: Domain,
        proposal: Any,
        acceptance: Any = None,
    ) -> Array:
        accepted: list[Array] = []
        count = 0
        while count < n:
            batch = proposal(rng, 2 * (n - count) + 16, domain)
            keep = domain.zeta(batch) < 0
            if acceptance is not None:
                keep &= rng.uniform(size=len(batch)) < acceptance(batch)
            accepted.append(batch[keep])
            count += int(keep.sum())
        return np.concatenate(accepted)[:n]

    def sample_velocities(self, rng: np.random.Generator, n: int) -> Array:
        return np.sqrt(self.velocity_variance) * rng.standard_normal((n, self.dim))


def uniform_ball(rng: np.random.Generator, n: int, dim: int) -> Array:
    """`n` points uniformly distributed in the unit ball."""
    directions = rng.standard_normal((n, dim))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    radii = rng.uniform(size=n) ** (1 / dim)
    return np.asarray(directions * radii[:, None])
