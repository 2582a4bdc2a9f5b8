"""Run configuration shared by every study and CLI command.

Configs are TOML (or JSON, by file suffix) tables whose keys mirror the
fields of RunConfig. Example::

    eps = [0.4, 0.2, 0.1]
    n_particles = 200000
    t_end = 0.25
    seed = 7

    [mesh]
    n_r = 8
    n_theta = 16

    [initial]
    kind = "bump"
    center = [0.4, 0.0]
"""

import hashlib
import json
import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import tomlkit
from tomlkit.exceptions import TOMLKitError

from ..geometry import Domain
from ..heat import SCHEMES, Scheme
from ..initial import InitialDatum
from ..kinetic.ensemble import BOUNDARY_MODES, BoundaryMode, default_dt
from ..mesh import Mesh

logger = logging.getLogger(__name__)

SAMPLERS = ("angle-averaged", "uniform", "direction-sup")


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    domain: dict[str, Any] = field(default_factory=lambda: {"kind": "unit-ball"})
    eps: tuple[float, ...] = (0.4, 0.2, 0.1)
    n_particles: int = 200_000
    dt: float | None = None
    """Kinetic time step; None means ε²/8 for each ε."""
    t_end: float = 0.25
    seed: int = 0
    seeds: int = 3
    """Independent replicas per ε, seeded seed, seed + 1, ..."""
    mesh: dict[str, Any] = field(default_factory=lambda: {"n_r": 8, "radius": 1.0})
    """n_theta defaults to 16 sectors in 2-D and a radial-only mesh in 3-D."""
    initial: dict[str, Any] = field(default_factory=lambda: {"kind": "bump"})
    boundary_mode: BoundaryMode = "reflecting"
    snapshot_every: int | None = None
    """Steps between stored snapshots; None stores only the start and end."""
    heat_scheme: Scheme = "implicit"
    heat_dt: float = 1e-3
    moment_order: int = 4
    test_functions: tuple[int, ...] = (1, 2, 3)
    p: float = 2.0
    schedule: tuple[int, ...] = (100_000, 300_000, 1_000_000)
    sampler: str = "uniform"
    workers: int = 1
    output: str | None = None

    class ParseError(ValueError):
        """The configuration is malformed or inconsistent."""

    def __post_init__(self) -> None:
        def check(condition: bool, message: str) -> None:
            if not condition:
                raise RunConfig.ParseError(message)

        check(self.dim in (2, 3), f"dim must be 2 or 3, got {self.dim}")
        check(
            len(self.eps) > 0 and all(e > 0 for e in self.eps),
            f"eps must be a nonempty list of positive values, got {list(self.eps)}",
        )
        check(
            self.n_particles >= 1,
            f"n_particles must be positive, got {self.n_particles}",
        )
        check(self.dt is None or self.dt > 0, f"dt must be positive, got {self.dt}")
        check(self.t_end >= 0, f"t_end must be nonnegative, got {self.t_end}")
        check(self.seeds >= 1, f"seeds must be positive, got {self.seeds}")
        check(
            self.boundary_mode in BOUNDARY_MODES,
            f"boundary_mode must be one of {BOUNDARY_MODES}",
        )
        check(self.heat_scheme in SCHEMES, f"heat_scheme must be one of {SCHEMES}")
        check(self.heat_dt > 0, f"heat_dt must be positive, got {self.heat_dt}")
        check(
            1 <= self.moment_order <= 4,
            f"moment_order must lie in [1, 4], got {self.moment_order}",
        )
        check(self.p > 0, f"p must be positive, got {self.p}")
        schedule = self.schedule
        check(
            len(schedule) > 0
            and all(b > a for a, b in zip(schedule, schedule[1:]))
            and schedule[0] > 0,
            f"schedule must be strictly increasing and positive, got {list(schedule)}",
        )
        check(self.sampler in SAMPLERS, f"sampler must be one of {SAMPLERS}")
        check(self.workers >= 1, f"workers must be positive, got {self.workers}")
        # Surface domain, mesh and datum errors at load time.
        try:
            domain = self.build_domain()
            self.build_mesh()
            self.build_initial()
        except (ValueError, KeyError, TypeError) as error:
            raise RunConfig.ParseError(str(error)) from error
        check(
            domain.dim == self.dim,
            f"Domain dimension {domain.dim} does not match dim = {self.dim}",
        )

    @staticmethod
    def from_mapping(values: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(RunConfig)}
        if unknown := sorted(set(values) - known):
            raise RunConfig.ParseError(f"Unknown config keys: {unknown}")
        converted = dict(values)
        for key in ("eps", "test_functions", "schedule"):
            if key in converted:
                converted[key] = tuple(converted[key])
        for key in ("domain", "mesh", "initial"):
            if key in converted:
                converted[key] = dict(converted[key])
        try:
            return RunConfig(**converted)
        except TypeError as error:
            raise RunConfig.ParseError(str(error)) from error

    @staticmethod
    def load(path: Path) -> "RunConfig":
        """Read a TOML or JSON config file."""
        return RunConfig.from_mapping(read_table(path))

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with the given fields replaced; None values are ignored."""
        values = {k: v for k, v in overrides.items() if v is not None}
        if not values:
            return self
        merged = {**asdict(self), **values}
        return RunConfig.from_mapping(merged)

    def merged_with(self, path: Path | None) -> "RunConfig":
        """Values from the file at `path` layered over this config."""
        if path is None or not path.exists():
            return self
        return self.with_overrides(**read_table(path))

    def build_domain(self) -> Domain:
        return Domain.from_config({"dim": self.dim, **self.domain})

    def build_mesh(self) -> Mesh:
        return Mesh.from_config(self.mesh, self.dim)

    def build_initial(self) -> InitialDatum:
        return InitialDatum.from_config(self.initial, self.dim)

    def step_for(self, eps: float) -> float:
        return self.dt if self.dt is not None else default_dt(eps)

    def replica_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.seeds)]

    def resolved(self) -> dict[str, Any]:
        """Every setting with defaults made explicit, as embedded in reports."""
        values = asdict(self)
        values["eps"] = list(self.eps)
        values["test_functions"] = list(self.test_functions)
        values["schedule"] = list(self.schedule)
        values["domain"] = self.build_domain().to_config()
        values["mesh"] = self.build_mesh().to_config()
        values["initial"] = self.build_initial().to_config()
        values["dt_by_eps"] = {repr(eps): self.step_for(eps) for eps in self.eps}
        values["seed_list"] = self.replica_seeds()
        return values

    def digest(self) -> str:
        """SHA-256 of the resolved config."""
        text = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def to_toml(self) -> str:
        document = tomlkit.document()
        for key, value in self.resolved().items():
            if value is not None and key not in ("dt_by_eps", "seed_list"):
                document[key] = value
        return tomlkit.dumps(document)


def read_table(path: Path) -> dict[str, Any]:
    """Top-level table of a TOML or JSON file."""
    text = path.read_text()
    try:
        if path.suffix == ".json":
            values = json.loads(text)
        else:
            values = tomlkit.loads(text).unwrap()
    except (TOMLKitError, json.JSONDecodeError) as error:
        raise RunConfig.ParseError(f"{path}: {error}") from error
    if not isinstance(values, dict):
        raise RunConfig.ParseError(f"{path}: expected a table at the top level")
    logger.debug(f"Read config table from {path}")
    return values
