"""Diffusion-limit studies: ε-convergence, weak residuals, chord integrability.

Every study takes a RunConfig and returns a report whose verdict is decided by
error bars, never by a fitted rate.
"""

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy import special

from ..billiards import SpecularCycle, disk_cycle, specular_cycle
from ..endpoint_calculus import (
    EndpointDerivatives,
    TestFunction,
    ball_derivatives_batch,
    chord_data,
    chord_lengths,
    composite_laplacian,
    endpoint_derivatives,
    neumann_family,
)
from ..endpoint_calculus.derivatives import Mode as EndpointMode
from ..geometry import Array, Domain, UnitBall
from ..heat import (
    HeatState,
    free_space_reference,
    heat_solve,
    l2_error,
    project_initial,
)
from ..initial import uniform_ball
from ..iter import pairwise_ratios
from ..kinetic import Diagnostics, ParticleEnsemble, density, evolve, sample_initial
from ..kinetic.ensemble import block_generator, step_count
from ..mesh import ScalarField
from ..render import TableFields
from .config import SAMPLERS, RunConfig
from .jobs import run_jobs

logger = logging.getLogger(__name__)

CONVERGED_CHANGE = 0.05
"""Largest relative change between successive estimates for a converging verdict."""

DIVERGED_GROWTH = 2.0
"""Smallest final/first ratio of estimates for a diverging verdict."""

RESIDUAL_SNAPSHOTS = 64
"""Trapezoid intervals over [0, t_end] when the config sets no snapshot cadence."""

DEFAULT_SCHEDULE = (100_000, 300_000, 1_000_000)


class Verdict(str, Enum):
    MONOTONE = "monotone"
    NON_MONOTONE = "non-monotone"
    INCONCLUSIVE = "inconclusive"
    CONVERGING = "converging"
    DIVERGING = "diverging"

    @property
    def failed(self) -> bool:
        """Only a contradicted ordering fails; divergence may be expected."""
        return self is Verdict.NON_MONOTONE


def ordering_verdict(values: Sequence[float], bars: Sequence[float]) -> Verdict:
    """Whether `values`, ordered by decreasing ε, drop beyond their error bars."""
    if len(values) < 2 or any(bar > value for value, bar in zip(values, bars)):
        return Verdict.INCONCLUSIVE
    decreasing = True
    for (a, bar_a), (b, bar_b) in zip(zip(values, bars), zip(values[1:], bars[1:])):
        margin = math.hypot(bar_a, bar_b)
        if b - a > margin:
            return Verdict.NON_MONOTONE
        if a - b <= margin:
            decreasing = False
    return Verdict.MONOTONE if decreasing else Verdict.INCONCLUSIVE


def trajectory(
    config: RunConfig, eps: float, seed: int, every: int | None = None
) -> Iterator[ParticleEnsemble]:
    """Snapshots of one kinetic run from its initial sample to t_end."""
    ensemble = sample_initial(
        config.build_initial(),
        config.n_particles,
        seed,
        eps,
        config.build_domain(),
        config.boundary_mode,
    )
    yield from evolve(ensemble, config.t_end, config.step_for(eps), every)


def reference_density(config: RunConfig) -> ScalarField:
    """The limit density at t_end.

    This is the Neumann heat flow, or the exact heat kernel in free space.
    """
    mesh = config.build_mesh()
    datum = config.build_initial()
    if config.boundary_mode == "free-space":
        return free_space_reference(datum, mesh, config.t_end)
    if mesh.radius != 1.0:
        raise RunConfig.ParseError(
            f"Reflecting runs need a unit-radius mesh, got radius {mesh.radius}"
        )
    initial = project_initial(datum, mesh)
    return heat_solve(initial, config.t_end, config.heat_dt, config.heat_scheme).field


@dataclass(frozen=True)
class ConvergenceEntry:
    eps: float
    n_particles: int
    dt: float
    t_end: float
    error: float
    """Mean over seeds of the L² distance to the reference density."""
    error_bar: float
    """Standard error of that mean."""
    noise_floor: float
    """mass/√N, the expected L² size of pure histogram noise."""
    seeds: int
    mass_drift: float

    @classmethod
    def __table_fields__(cls) -> TableFields:
        yield "ε", lambda e: f"{e.eps:g}"
        yield "N", lambda e: f"{e.n_particles:,}"
        yield "dt", lambda e: f"{e.dt:.3e}"
        yield "L² error", lambda e: f"{e.error:.4e} ± {e.error_bar:.1e}"
        yield "Noise floor", lambda e: f"{e.noise_floor:.1e}"
        yield "Seeds", lambda e: str(e.seeds)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    config: RunConfig
    entries: list[ConvergenceEntry]
    verdict: Verdict
    reference: ScalarField
    densities: dict[float, ScalarField] = field(default_factory=dict)
    """Seed-averaged kinetic density at t_end for each ε."""

    def to_json(self) -> dict[str, Any]:
        return {
            "study": "converge",
            "config": self.config.resolved(),
            "reference": (
                "heat-kernel"
                if self.config.boundary_mode == "free-space"
                else "neumann-heat"
            ),
            "entries": [vars(e) for e in self.entries],
            "verdict": self.verdict.value,
        }


def _density_job(job: tuple[RunConfig, float, int]) -> Array:
    config, eps, seed = job
    for ensemble in trajectory(config, eps, seed):
        pass
    return density(ensemble, config.build_mesh()).values


def converge_study(config: RunConfig) -> ConvergenceReport:
    """L² distance between ρ^ε(t_end) and the limit density, per ε over seeds."""
    mesh = config.build_mesh()
    mass = config.build_initial().mass
    reference = reference_density(config)
    epsilons = sorted(config.eps, reverse=True)
    seeds = config.replica_seeds()
    jobs = [(config, eps, seed) for eps in epsilons for seed in seeds]
    results = iter(run_jobs(_density_job, jobs, config.workers))

    entries = []
    densities = {}
    for eps in epsilons:
        fields = [ScalarField(mesh, next(results)) for _ in seeds]
        errors = np.array([l2_error(f, reference) for f in fields])
        error_bar = math.inf
        if len(errors) > 1:
            error_bar = float(errors.std(ddof=1) / math.sqrt(len(errors)))
        drift = 0.0
        if config.boundary_mode == "reflecting":
            drift = max(abs(f.integral() - mass) for f in fields)
        dt = config.step_for(eps)
        if config.t_end:
            dt = config.t_end / step_count(config.t_end, dt)
        densities[eps] = ScalarField(mesh, np.mean([f.values for f in fields], axis=0))
        entries.append(
            ConvergenceEntry(
                eps=eps,
                n_particles=config.n_particles,
                dt=dt,
                t_end=config.t_end,
                error=float(errors.mean()),
                error_bar=error_bar,
                noise_floor=mass / math.sqrt(config.n_particles),
                seeds=len(seeds),
                mass_drift=drift,
            )
        )
        logger.info(
            f"ε = {eps:g}: L² error {entries[-1].error:.4e} ± {error_bar:.1e}"
        )
    verdict = ordering_verdict(
        [e.error for e in entries], [e.error_bar for e in entries]
    )
    return ConvergenceReport(config, entries, verdict, reference, densities)


def residual_test_functions(config: RunConfig) -> list[tuple[int, TestFunction]]:
    """Time-dependent test functions vanishing at t_end, checked on the boundary."""
    if config.t_end <= 0:
        raise RunConfig.ParseError("The weak residual needs a positive t_end")
    functions = []
    for index in config.test_functions:
        try:
            psi = neumann_family(index, config.dim)
        except ValueError as error:
            raise RunConfig.ParseError(str(error)) from error
        psi.check_neumann(config.dim)
        functions.append((index, psi.with_time_factor(config.t_end)))
    return functions


def _endpoint_terms(ensemble: ParticleEnsemble) -> tuple[Array, Array, Array]:
    """η(x, εv), ∇_uη and Δ_uη for every particle."""
    u = ensemble.eps * ensemble.v
    if ensemble.boundary_mode == "free-space":
        shape = (ensemble.size, ensemble.dim, ensemble.dim)
        identity = np.broadcast_to(np.eye(ensemble.dim), shape)
        return ensemble.x + u, identity, np.zeros_like(u)
    if isinstance(ensemble.domain, UnitBall):
        eta, jacobian, laplacian, _ = ball_derivatives_batch(ensemble.x, u)
        return eta, jacobian, laplacian
    assert ensemble.domain is not None
    rows = [endpoint_derivatives(ensemble.domain, x, w) for x, w in zip(ensemble.x, u)]
    return (
        np.stack([r.eta for r in rows]),
        np.stack([r.jacobian for r in rows]),
        np.stack([r.laplacian for r in rows]),
    )


def _residual_job(job: tuple[RunConfig, float, int]) -> dict[int, tuple[Array, Array]]:
    """Per-particle kinetic and macroscopic residual terms for each test function."""
    config, eps, seed = job
    functions = residual_test_functions(config)
    steps = step_count(config.t_end, config.step_for(eps))
    every = config.snapshot_every or max(1, steps // RESIDUAL_SNAPSHOTS)
    kinetic = {index: np.zeros(config.n_particles) for index, _ in functions}
    macro = {index: np.zeros(config.n_particles) for index, _ in functions}
    previous: dict[int, tuple[Array, Array]] = {}
    last_t = 0.0
    for ensemble in trajectory(config, eps, seed, every):
        t, x = ensemble.t, ensemble.x
        eta, jacobian, laplacian = _endpoint_terms(ensemble)
        for index, psi in functions:
            kinetic_rate = psi.time_derivative(t, eta) + composite_laplacian(
                psi, t, eta, jacobian, laplacian
            )
            macro_rate = psi.time_derivative(t, x) + psi.laplacian(t, x)
            if index in previous:
                width = (t - last_t) / 2
                kinetic[index] += width * (previous[index][0] + kinetic_rate)
                macro[index] += width * (previous[index][1] + macro_rate)
            else:
                kinetic[index] += psi.value(t, eta)
                macro[index] += psi.value(t, x)
            previous[index] = (kinetic_rate, macro_rate)
        last_t = t
    return {index: (kinetic[index], macro[index]) for index, _ in functions}


@dataclass(frozen=True)
class ResidualEntry:
    eps: float
    index: int
    function: str
    kinetic: float
    kinetic_error: float
    macro: float
    macro_error: float

    @classmethod
    def __table_fields__(cls) -> TableFields:
        yield "ε", lambda e: f"{e.eps:g}"
        yield "ψ", lambda e: e.function
        yield "Kinetic R", lambda e: f"{e.kinetic:+.4e} ± {e.kinetic_error:.1e}"
        yield "Macroscopic R", lambda e: f"{e.macro:+.4e} ± {e.macro_error:.1e}"


@dataclass(frozen=True)
class ResidualReport:
    config: RunConfig
    entries: list[ResidualEntry]
    verdict: Verdict
    decreasing: list[int]
    """Test functions whose macroscopic |R| drops beyond error bars.

    The drop is measured from the largest to the smallest ε.
    """

    def to_json(self) -> dict[str, Any]:
        return {
            "study": "weak-residual",
            "config": self.config.resolved(),
            "entries": [vars(e) for e in self.entries],
            "decreasing": self.decreasing,
            "verdict": self.verdict.value,
        }


def _mean_and_error(values: Array, mass: float) -> tuple[float, float]:
    if len(values) < 2:
        return float(mass * values.mean()), math.inf
    error = values.std(ddof=1) / math.sqrt(len(values))
    return float(mass * values.mean()), float(mass * error)


def weak_residual_study(config: RunConfig) -> ResidualReport:
    """Weak-formulation residuals R(ε) of test functions vanishing at t_end.

    The kinetic residual pairs the particles with ψ(t, η(x, εv)) and vanishes
    at every ε up to time-stepping error; the macroscopic residual pairs them
    with ψ(t, x) and vanishes only in the limit ε → 0.
    """
    functions = residual_test_functions(config)
    mass = config.build_initial().mass
    epsilons = sorted(config.eps, reverse=True)
    seeds = config.replica_seeds()
    jobs = [(config, eps, seed) for eps in epsilons for seed in seeds]
    results = iter(run_jobs(_residual_job, jobs, config.workers))

    entries = []
    for eps in epsilons:
        # Seeds are independent, so their particles pool into one sample.
        pooled = [next(results) for _ in seeds]
        for index, psi in functions:
            kinetic = _mean_and_error(
                np.concatenate([p[index][0] for p in pooled]), mass
            )
            macro = _mean_and_error(np.concatenate([p[index][1] for p in pooled]), mass)
            entries.append(ResidualEntry(eps, index, psi.name, *kinetic, *macro))
            logger.info(
                f"ε = {eps:g}, ψ = {psi.name}: "
                f"kinetic {kinetic[0]:+.3e}, macroscopic {macro[0]:+.3e}"
            )

    decreasing: list[int] = []
    increasing: list[int] = []
    if len(epsilons) > 1:
        for index, _ in functions:
            series = [e for e in entries if e.index == index]
            first, last = series[0], series[-1]
            margin = math.hypot(first.macro_error, last.macro_error)
            if abs(first.macro) - abs(last.macro) > margin:
                decreasing.append(index)
            elif abs(last.macro) - abs(first.macro) > margin:
                increasing.append(index)
    # The constant function has no ε-dependence to resolve.
    nonconstant = [index for index, _ in functions if index != 0]
    if increasing:
        verdict = Verdict.NON_MONOTONE
    elif nonconstant and len(decreasing) >= min(2, len(nonconstant)):
        verdict = Verdict.MONOTONE
    else:
        verdict = Verdict.INCONCLUSIVE
    return ResidualReport(config, entries, verdict, decreasing)


@dataclass(frozen=True)
class IntegrabilityEntry:
    samples: int
    estimate: float
    standard_error: float

    @classmethod
    def __table_fields__(cls) -> TableFields:
        yield "Samples", lambda e: f"{e.samples:,}"
        yield "Mean (2/L)^p", lambda e: f"{e.estimate:.6g}"
        yield "Std. error", lambda e: f"{e.standard_error:.2e}"


@dataclass(frozen=True)
class IntegrabilityReport:
    p: float
    sampler: str
    seed: int
    entries: list[IntegrabilityEntry]
    verdict: Verdict

    def to_json(self) -> dict[str, Any]:
        return {
            "study": "integrability",
            "config": {
                "p": self.p,
                "sampler": self.sampler,
                "seed": self.seed,
                "schedule": [e.samples for e in self.entries],
            },
            "entries": [vars(e) for e in self.entries],
            "verdict": self.verdict.value,
        }


def _angle_averaged(p: float, n: int) -> float:
    """Midpoint rule in s = |x|² of the direction average of (2/L)^p.

    That average is (1/π)∫(1 − s·sin²φ)^(−p/2) dφ = ₂F₁(p/2, 1/2; 1; s).
    """
    s = (np.arange(n) + 0.5) / n
    return float(np.mean(special.hyp2f1(p / 2, 0.5, 1.0, s)))


def _chord_powers(p: float, n: int, rng: np.random.Generator, sampler: str) -> Array:
    x = uniform_ball(rng, n, 2)
    if sampler == "direction-sup":
        # The shortest chord through x is perpendicular to it.
        radius = np.linalg.norm(x, axis=-1, keepdims=True)
        perpendicular = np.stack([-x[:, 1], x[:, 0]], axis=-1)
        directions = perpendicular / np.where(radius > 0, radius, 1.0)
        directions[radius[:, 0] == 0] = (1.0, 0.0)
    else:
        angle = rng.uniform(0, 2 * np.pi, n)
        directions = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    return np.asarray((2 / chord_lengths(x, directions)) ** p)


def integrability_study(
    p: float,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    seed: int = 0,
    sampler: str = "uniform",
) -> IntegrabilityReport:
    """Running estimates of the mean of (2/L)^p over the unit disk and all directions.

    The mean is finite exactly when p < 3 (p < 2 for the direction-sup
    sampler, which takes the shortest chord through each point).
    """
    if p <= 0:
        raise ValueError(f"Exponent must be positive, got {p}")
    if sampler not in SAMPLERS:
        raise ValueError(f"Unknown sampler '{sampler}'; expected one of {SAMPLERS}")
    increasing = all(b > a for a, b in zip(schedule, schedule[1:]))
    if not schedule or not increasing or schedule[0] < 2:
        raise ValueError(
            "Schedule must be strictly increasing from at least 2, "
            f"got {list(schedule)}"
        )
    entries = []
    for k, n in enumerate(schedule):
        if sampler == "angle-averaged":
            estimate = _angle_averaged(p, n)
            # Difference from the half-resolution rule stands in for the error.
            error = abs(estimate - _angle_averaged(p, n // 2))
        else:
            values = _chord_powers(p, n, block_generator(seed, k), sampler)
            estimate = float(values.mean())
            error = float(values.std(ddof=1) / math.sqrt(n))
        entries.append(IntegrabilityEntry(n, estimate, error))
        logger.debug(f"p = {p}, {n} samples: {estimate:.6g} ± {error:.2e}")

    estimates = [e.estimate for e in entries]
    if len(estimates) < 2:
        verdict = Verdict.INCONCLUSIVE
    elif all(change < CONVERGED_CHANGE for change in pairwise_ratios(estimates)):
        verdict = Verdict.CONVERGING
    elif estimates[-1] / estimates[0] >= DIVERGED_GROWTH:
        verdict = Verdict.DIVERGING
    else:
        verdict = Verdict.INCONCLUSIVE
    return IntegrabilityReport(p, sampler, seed, entries, verdict)


@dataclass(frozen=True, eq=False)
class SimulationReport:
    config: RunConfig
    eps: float
    seed: int
    diagnostics: list[Diagnostics]
    snapshots: list[tuple[float, ScalarField]]

    def to_json(self) -> dict[str, Any]:
        return {
            "study": "simulate",
            "config": self.config.resolved(),
            "eps": self.eps,
            "seed": self.seed,
            "diagnostics": [vars(d) for d in self.diagnostics],
        }


def simulate_study(config: RunConfig) -> SimulationReport:
    """One kinetic run at the first ε and seed, with diagnostics at every snapshot."""
    eps, seed = config.eps[0], config.seed
    mesh = config.build_mesh()
    diagnostics = []
    snapshots = []
    for ensemble in trajectory(config, eps, seed, config.snapshot_every):
        diagnostics.append(Diagnostics.measure(ensemble, mesh, config.moment_order))
        snapshots.append((ensemble.t, density(ensemble, mesh)))
    return SimulationReport(config, eps, seed, diagnostics, snapshots)


@dataclass(frozen=True, eq=False)
class HeatReport:
    config: RunConfig
    initial: ScalarField
    final: HeatState

    @property
    def mass_drift(self) -> float:
        return abs(self.final.mass() - self.initial.integral())

    def to_json(self) -> dict[str, Any]:
        values = self.final.field.values
        return {
            "study": "heat",
            "config": self.config.resolved(),
            "t": self.final.t,
            "mass": self.final.mass(),
            "mass_drift": self.mass_drift,
            "min": float(values.min()),
            "max": float(values.max()),
        }


def heat_study(config: RunConfig) -> HeatReport:
    """The Neumann heat flow of the projected initial datum up to t_end."""
    initial = project_initial(config.build_initial(), config.build_mesh())
    final = heat_solve(initial, config.t_end, config.heat_dt, config.heat_scheme)
    return HeatReport(config, initial, final)


@dataclass(frozen=True, eq=False)
class TraceReport:
    config: RunConfig
    cycle: SpecularCycle
    max_points: int

    def to_json(self) -> dict[str, Any]:
        return {
            "study": "trace",
            "config": self.config.resolved(),
            "cycle": self.cycle.to_json(self.max_points),
        }


def trace_study(
    config: RunConfig, x: Sequence[float], v: Sequence[float], max_points: int
) -> TraceReport:
    """The specular cycle of (x, v) in the configured domain."""
    domain = config.build_domain()
    cycle: SpecularCycle
    if isinstance(domain, UnitBall):
        cycle = disk_cycle(x, v)
    else:
        cycle = specular_cycle(domain, x, v)
    return TraceReport(config, cycle, max_points)


def endpoint_header(dim: int) -> list[str]:
    axes = range(dim)
    return [
        *(f"x{i}" for i in axes),
        *(f"v{i}" for i in axes),
        *(f"eta{i}" for i in axes),
        *(f"J{i}{j}" for i in axes for j in axes),
        *(f"lap{i}" for i in axes),
        "N",
        "L",
        "near_grazing",
    ]


def endpoint_row(
    domain: Domain, x: Array, v: Array, derivatives: EndpointDerivatives
) -> list[float | int | None]:
    chord = None
    if isinstance(domain, UnitBall) and np.any(v):
        chord = float(chord_data(x, v).length)
    return [
        *map(float, x),
        *map(float, v),
        *map(float, derivatives.eta),
        *map(float, derivatives.jacobian.ravel()),
        *map(float, derivatives.laplacian),
        int(derivatives.reflection_count),
        chord,
        int(derivatives.near_grazing),
    ]


def random_phase_points(
    domain: Domain, samples: int, max_speed: float, seed: int
) -> list[tuple[Array, Array]]:
    """Uniform positions in the domain; isotropic velocities below max_speed."""
    rng = np.random.default_rng(seed)
    proposals = uniform_ball(rng, 4 * samples + 16, domain.dim)
    positions = domain.bounding_radius * proposals
    positions = positions[domain.zeta(positions) < 0][:samples]
    directions = rng.standard_normal((len(positions), domain.dim))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    velocities = max_speed * rng.uniform(size=(len(positions), 1)) * directions
    return list(zip(positions, velocities))


@dataclass(frozen=True, eq=False)
class EndpointReport:
    config: RunConfig
    mode: EndpointMode
    header: list[str]
    rows: list[list[float | int | None]]
    skipped: int

    def to_json(self) -> dict[str, Any]:
        return {
            "study": "endpoint",
            "config": self.config.resolved(),
            "mode": self.mode,
            "skipped": self.skipped,
            "rows": [dict(zip(self.header, row)) for row in self.rows],
        }


def endpoint_study(
    config: RunConfig,
    points: Sequence[tuple[Array, Array]],
    mode: EndpointMode = "analytic",
    skip_failures: bool = False,
) -> EndpointReport:
    """η, its velocity Jacobian and Laplacian at each phase point.

    Points at a jump of η or on a grazing cycle raise, or are logged and
    counted when `skip_failures` is set.
    """
    domain = config.build_domain()
    rows = []
    skipped = 0
    for x, v in points:
        try:
            derivatives = endpoint_derivatives(domain, x, v, mode)
        except (
            EndpointDerivatives.DiscontinuityError,
            SpecularCycle.GrazingError,
        ) as error:
            if not skip_failures:
                raise
            logger.warning(f"Skipping ({x}, {v}): {error}")
            skipped += 1
            continue
        rows.append(endpoint_row(domain, x, v, derivatives))
    return EndpointReport(config, mode, endpoint_header(domain.dim), rows, skipped)
