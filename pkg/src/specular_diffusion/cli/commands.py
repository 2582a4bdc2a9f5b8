"""User-facing command-line interface using `click`.

This is effectively the top-level code when the tool is executed as a program.

Any code directly interfacing with `rich` is housed here to avoid standalone
parts of the code being tied up with console output.

"""

import json
import logging
import time
from pathlib import Path
from sys import argv
from typing import Any

import numpy as np
import rich_click as click
from rich import get_console, print, traceback
from rich.console import Console
from rich.logging import RichHandler
from rich_click import argument, option

from .. import VERSION
from ..billiards import SpecularCycle
from ..dirs import user_config_file
from ..endpoint_calculus import EndpointDerivatives, TestFunction
from ..geometry import Domain
from ..harness import (
    RunConfig,
    Verdict,
    converge_study,
    density_filename,
    endpoint_study,
    heat_study,
    integrability_study,
    random_phase_points,
    simulate_study,
    trace_study,
    weak_residual_study,
    write_run,
)
from ..harness.config import SAMPLERS
from ..harness.output import Report, run_directory, write_rows_csv
from ..heat import SCHEMES
from ..initial import KINDS
from ..kinetic import Diagnostics, ParticleEnsemble
from ..kinetic.ensemble import BOUNDARY_MODES
from ..mesh import ScalarField
from ..render import pretty_duration, to_table
from . import Group, fail
from .decorators import config_options, run_options, study_options
from .params import DomainParam, IntListParam, VectorParam

logger = logging.getLogger(__name__)

PROGRAM_NAME = "specular-diffusion"
"""Program name in help messages."""


def set_log_level(context: click.Context, param: click.Parameter, level: str) -> None:
    """Eager callback for --log-level flag."""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[
            RichHandler(
                console=Console(stderr=True),
                markup=True,
                omit_repeated_times=False,
            ),
        ],
    )


@click.version_option(VERSION, "--version", "-v", prog_name=PROGRAM_NAME)
@click.group(
    cls=Group,
    context_settings=dict(
        help_option_names=["-h", "--help"],
    ),
    epilog=f"Version: {VERSION}",
)
@option(
    "--log-level",
    "-l",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="INFO",
    callback=set_log_level,
    is_eager=True,
    expose_value=False,
    envvar="LOG_LEVEL",
    help="Only display logs at or above ths level.",
)
def main() -> None:
    """Specular billiards, kinetic particles and heat flow in the unit ball.

    Checks the diffusion limit of reflected kinetic Fokker-Planck particles.
    """

    # Setup pretty traceback handler in a way that's relatively compact and
    # quiet, so that exceptions generally fit within a fraction of the terminal
    # window.

    # Import modules without aliased names.
    import click
    import rich_click

    traceback.install(
        show_locals=True,
        # Suppress frames from uninteresting wrapper functions, and the top-level
        # wrapper script.
        suppress=[click, rich_click, argv[0]],
        max_frames=3,
        extra_lines=1,
    )


def load_config(config_path: Path | None, **overrides: Any) -> RunConfig:
    """Defaults, then the user config file, then `config_path`, then flags."""
    try:
        config = RunConfig().merged_with(user_config_file).merged_with(config_path)
        return config.with_overrides(**overrides)
    except RunConfig.ParseError as error:
        fail(f"Invalid configuration: {error}")


def finish(
    command: str,
    config: RunConfig,
    report: Report,
    started: float,
    densities: dict[str, ScalarField] | None = None,
    directory: Path | None = None,
    announce: bool = True,
) -> Path:
    """Write the run directory and report where it went.

    With `announce` unset the location is logged rather than printed, so that
    machine-readable stdout stays clean.
    """
    directory = directory or run_directory(config, command)
    wall_time = time.perf_counter() - started
    manifest = write_run(directory, command, config, report, wall_time, densities)
    message = (
        f"Results written to [blue]{directory}[/] in "
        f"{pretty_duration(manifest.wall_time)}."
    )
    if announce:
        print(message)
    else:
        logger.info(message)
    return directory


def domain_dim(domain: dict[str, Any] | None) -> int | None:
    """Dimension implied by explicit semi-axes, if any."""
    return len((domain or {}).get("semi_axes", ())) or None


@main.command
@argument("x", type=VectorParam())
@argument("v", type=VectorParam())
@config_options
@option(
    "--domain",
    "-d",
    "domain_config",
    type=DomainParam(),
    help="Domain (default: unit-ball).",
)
@option(
    "--max-points",
    type=int,
    default=50,
    show_default=True,
    help="Reflections to list.",
)
@option("--json", "as_json", is_flag=True, help="Print the cycle as JSON.")
def trace(
    x: tuple[float, ...],
    v: tuple[float, ...],
    config_path: Path | None,
    output: Path | None,
    domain_config: dict[str, Any] | None,
    max_points: int,
    as_json: bool,
) -> None:
    """Trace the specular cycle of the phase point (X, V).

    The cycle is the constant-speed reflected straight line of total length |V|
    starting at X; its end is the end-point η(X, V).
    """
    if len(x) != len(v):
        fail(f"X and V must have the same dimension, got {len(x)} and {len(v)}")
    config = load_config(
        config_path,
        output=str(output) if output else None,
        dim=len(x),
        domain=domain_config,
    )
    started = time.perf_counter()
    try:
        report = trace_study(config, x, v, max_points)
    except (
        SpecularCycle.GrazingError,
        SpecularCycle.RunawayError,
        Domain.BracketError,
        ValueError,
    ) as error:
        fail(str(error))
    cycle = report.cycle

    if as_json:
        get_console().print(
            json.dumps(cycle.to_json(max_points), sort_keys=True),
            markup=False,
            highlight=False,
            soft_wrap=True,
        )
        finish("trace", config, report, started, announce=False)
        return
    eta = np.array2string(cycle.endpoint, precision=12)
    print(f"Reflections: [green]{cycle.reflection_count}[/]; end-point η = {eta}")
    if cycle.near_grazing:
        print("[yellow]Warning[/]: the cycle passes close to a grazing reflection.")
    if cycle.reflection_count:
        shown = min(cycle.reflection_count, max_points)
        table = to_table(CycleRow, (CycleRow(i, cycle) for i in range(shown)))
        print(table)
        if shown < cycle.reflection_count:
            print(f"... {cycle.reflection_count - shown} more reflections not shown.")
    finish("trace", config, report, started)


class CycleRow:
    def __init__(self, index: int, cycle: SpecularCycle) -> None:
        self.index = index
        self.tau = float(cycle.breakpoints[index])
        self.point = cycle.reflection_points[index]
        self.velocity = cycle.velocities[index + 1]

    @classmethod
    def __table_fields__(cls) -> Any:
        yield "#", lambda r: str(r.index + 1)
        yield "τ", lambda r: f"{r.tau:.12g}"
        yield "Reflection point", lambda r: np.array2string(r.point, precision=9)
        yield "Velocity after", lambda r: np.array2string(r.velocity, precision=9)


def format_cell(name: str, value: float | int | None) -> str:
    if isinstance(value, float):
        return f"{name}={value:.10g}"
    return f"{name}={'' if value is None else value}"


ROWS_SHOWN = 20
"""Endpoint rows echoed to the terminal; all of them go to endpoint.csv."""


@main.command
@run_options
@option("--x", "x", type=VectorParam(), help="Single evaluation position.")
@option("--v", "v", type=VectorParam(), help="Single evaluation velocity.")
@option(
    "--samples",
    "-n",
    type=int,
    help="Evaluate at this many random phase points instead.",
)
@option(
    "--dim",
    type=click.Choice(["2", "3"]),
    help="Dimension of random samples (default 2).",
)
@option(
    "--max-speed",
    type=float,
    default=5.0,
    show_default=True,
    help="Largest speed of random samples.",
)
@option(
    "--mode",
    type=click.Choice(["analytic", "finite-difference"]),
    default="analytic",
    show_default=True,
)
@option(
    "--domain",
    "-d",
    "domain_config",
    type=DomainParam(),
    help="Domain (default: unit-ball).",
)
def endpoint(
    config_path: Path | None,
    seed: int | None,
    output: Path | None,
    x: tuple[float, ...] | None,
    v: tuple[float, ...] | None,
    samples: int | None,
    dim: str | None,
    max_speed: float,
    mode: str,
    domain_config: dict[str, Any] | None,
) -> None:
    """Evaluate the end-point η with its velocity Jacobian and Laplacian.

    Every row goes to endpoint.csv in the run directory.
    """
    if samples is None and (x is None or v is None):
        fail("Give either --x and --v, or --samples")
    if x is not None and v is not None and len(x) != len(v):
        fail(f"--x and --v must have the same dimension, got {len(x)} and {len(v)}")
    if x is not None:
        dimension = len(x)
    else:
        dimension = int(dim) if dim else domain_dim(domain_config)
    config = load_config(
        config_path,
        seed=seed,
        output=str(output) if output else None,
        dim=dimension,
        domain=domain_config,
    )

    points: list[tuple[np.ndarray, np.ndarray]]
    if samples is None:
        assert x is not None and v is not None
        points = [(np.asarray(x, dtype=np.float64), np.asarray(v, dtype=np.float64))]
    else:
        domain = config.build_domain()
        points = random_phase_points(domain, samples, max_speed, config.seed)
    started = time.perf_counter()
    try:
        report = endpoint_study(
            config,
            points,
            mode,  # type: ignore[arg-type]
            skip_failures=samples is not None,
        )
    except (
        EndpointDerivatives.DiscontinuityError,
        SpecularCycle.GrazingError,
    ) as error:
        fail(str(error))

    for row in report.rows[:ROWS_SHOWN]:
        print(", ".join(format_cell(*cell) for cell in zip(report.header, row)))
    if len(report.rows) > ROWS_SHOWN:
        print(f"... {len(report.rows) - ROWS_SHOWN} more rows.")
    if report.skipped:
        print(f"[yellow]{report.skipped}[/] phase points skipped.")
    directory = run_directory(config, "endpoint")
    write_rows_csv(directory / "endpoint.csv", report.header, report.rows)
    finish("endpoint", config, report, started, directory=directory)


@main.command
@run_options
@option("--eps", "-e", type=float, help="Knudsen number ε.")
@option("--n-particles", "-n", type=int, help="Number of particles.")
@option("--dt", type=float, help="Time step (default ε²/8).")
@option("--t-end", "-t", type=float, help="Final time.")
@option("--dim", type=click.Choice(["2", "3"]), help="Dimension.")
@option("--initial", "-i", type=click.Choice(KINDS), help="Initial datum.")
@option(
    "--boundary-mode",
    type=click.Choice(BOUNDARY_MODES),
    help="Reflecting unit ball or free space.",
)
@option("--snapshot-every", type=int, help="Steps between stored snapshots.")
def simulate(
    config_path: Path | None,
    seed: int | None,
    output: Path | None,
    eps: float | None,
    n_particles: int | None,
    dt: float | None,
    t_end: float | None,
    dim: str | None,
    initial: str | None,
    boundary_mode: str | None,
    snapshot_every: int | None,
) -> None:
    """Run the kinetic particle solver and record density snapshots and diagnostics."""
    config = load_config(
        config_path,
        seed=seed,
        output=str(output) if output else None,
        eps=(eps,) if eps is not None else None,
        n_particles=n_particles,
        dt=dt,
        t_end=t_end,
        dim=int(dim) if dim else None,
        initial={"kind": initial} if initial else None,
        boundary_mode=boundary_mode,
        snapshot_every=snapshot_every,
    )
    started = time.perf_counter()
    status = f"Simulating {config.n_particles:,} particles at ε = {config.eps[0]:g}."
    try:
        with get_console().status(status):
            report = simulate_study(config)
    except (ParticleEnsemble.EscapeError, ValueError) as error:
        fail(str(error))
    title = f"ε = {report.eps:g}, seed {report.seed}"
    print(to_table(Diagnostics, report.diagnostics, title=title))
    densities = {
        density_filename(report.eps, t): field for t, field in report.snapshots
    }
    finish("simulate", config, report, started, densities)


@main.command
@run_options
@option("--initial", "-i", type=click.Choice(KINDS), help="Initial datum.")
@option("--dim", type=click.Choice(["2", "3"]), help="Dimension.")
@option("--n-r", type=int, help="Radial cells.")
@option("--n-theta", type=int, help="Angular cells (1 for a radial-only mesh).")
@option("--t-end", "-t", type=float, help="Final time.")
@option("--dt", type=float, help="Time step.")
@option("--scheme", type=click.Choice(SCHEMES), help="Time stepping scheme.")
def heat(
    config_path: Path | None,
    seed: int | None,
    output: Path | None,
    initial: str | None,
    dim: str | None,
    n_r: int | None,
    n_theta: int | None,
    t_end: float | None,
    dt: float | None,
    scheme: str | None,
) -> None:
    """Solve the heat equation with zero-flux boundary on the unit disk or ball."""
    mesh = dict(load_config(config_path).mesh)
    if n_r is not None:
        mesh["n_r"] = n_r
    if n_theta is not None:
        mesh["n_theta"] = n_theta
    elif dim == "3":
        mesh.pop("n_theta", None)
    config = load_config(
        config_path,
        seed=seed,
        output=str(output) if output else None,
        initial={"kind": initial} if initial else None,
        dim=int(dim) if dim else None,
        mesh=mesh,
        t_end=t_end,
        heat_dt=dt,
        heat_scheme=scheme,
    )
    started = time.perf_counter()
    try:
        report = heat_study(config)
    except ValueError as error:
        fail(str(error))
    values = report.final.field.values
    print(
        f"Mass {report.final.mass():.15g} (drift {report.mass_drift:.1e}); "
        f"range [{values.min():.6g}, {values.max():.6g}] at t = {report.final.t:g}."
    )
    densities = {
        density_filename(None, 0.0): report.initial,
        density_filename(None, report.final.t): report.final.field,
    }
    finish("heat", config, report, started, densities)


def study_config(
    config_path: Path | None,
    output: Path | None,
    boundary_mode: str | None,
    **overrides: Any,
) -> RunConfig:
    config = load_config(
        config_path,
        output=str(output) if output else None,
        boundary_mode=boundary_mode,
        **overrides,
    )
    free_space = config.boundary_mode == "free-space"
    if free_space and config.initial.get("kind") != "gaussian":
        # Free-space runs start from a Gaussian and compare on a larger disk.
        logger.info("Free-space run: using a Gaussian datum on a mesh of radius 3")
        try:
            config = config.with_overrides(
                initial={"kind": "gaussian", "width": 0.2},
                mesh={"n_r": 12, "radius": 3.0},
            )
        except RunConfig.ParseError as error:
            fail(f"Invalid configuration: {error}")
    return config


def simulations_status(config: RunConfig) -> str:
    return f"Running {len(config.eps) * config.seeds} kinetic simulations."


@main.command
@run_options
@study_options
def converge(
    config_path: Path | None,
    seed: int | None,
    output: Path | None,
    eps: tuple[float, ...] | None,
    n_particles: int | None,
    t_end: float | None,
    seeds: int | None,
    boundary_mode: str | None,
    workers: int | None,
) -> None:
    """Compare the kinetic density at each ε with the heat-equation limit."""
    config = study_config(
        config_path,
        output,
        boundary_mode,
        seed=seed,
        eps=eps,
        n_particles=n_particles,
        t_end=t_end,
        seeds=seeds,
        workers=workers,
    )
    started = time.perf_counter()
    try:
        with get_console().status(simulations_status(config)):
            report = converge_study(config)
    except (ParticleEnsemble.EscapeError, ValueError) as error:
        fail(str(error))
    title = "L² distance to the limit density"
    print(to_table(type(report.entries[0]), report.entries, title=title))
    densities = {
        density_filename(eps, config.t_end): field
        for eps, field in report.densities.items()
    }
    densities[density_filename(None, config.t_end)] = report.reference
    finish("converge", config, report, started, densities)
    report_verdict(report.verdict)


@main.command("weak-residual")
@run_options
@study_options
@option(
    "--test-functions",
    type=IntListParam(),
    help="Comma-separated test function indices (0-4).",
)
def weak_residual(
    config_path: Path | None,
    seed: int | None,
    output: Path | None,
    eps: tuple[float, ...] | None,
    n_particles: int | None,
    t_end: float | None,
    seeds: int | None,
    boundary_mode: str | None,
    workers: int | None,
    test_functions: tuple[int, ...] | None,
) -> None:
    """Weak-formulation residuals of test functions with zero normal derivative."""
    config = study_config(
        config_path,
        output,
        boundary_mode,
        seed=seed,
        eps=eps,
        n_particles=n_particles,
        t_end=t_end,
        seeds=seeds,
        workers=workers,
        test_functions=test_functions,
    )
    started = time.perf_counter()
    try:
        with get_console().status(simulations_status(config)):
            report = weak_residual_study(config)
    except TestFunction.ContractError as error:
        fail(f"Test function rejected: {error}")
    except (ParticleEnsemble.EscapeError, ValueError) as error:
        fail(str(error))
    title = "Weak residuals R(ε)"
    print(to_table(type(report.entries[0]), report.entries, title=title))
    finish("weak-residual", config, report, started)
    report_verdict(report.verdict)


@main.command
@run_options
@option("--p", "-p", "p", type=float, help="Exponent of 2/L.")
@option(
    "--schedule",
    type=IntListParam(),
    help="Comma-separated, increasing sample counts.",
)
@option("--sampler", type=click.Choice(SAMPLERS), help="Estimator.")
@option(
    "--expect",
    type=click.Choice([Verdict.CONVERGING.value, Verdict.DIVERGING.value]),
    help="Fail unless this verdict is reached.",
)
def integrability(
    config_path: Path | None,
    seed: int | None,
    output: Path | None,
    p: float | None,
    schedule: tuple[int, ...] | None,
    sampler: str | None,
    expect: str | None,
) -> None:
    """Estimate the mean of (2/L)^p over the disk and judge whether it is finite.

    L is the chord length through a uniform point in a uniform direction.
    """
    config = load_config(
        config_path,
        seed=seed,
        output=str(output) if output else None,
        p=p,
        schedule=schedule,
        sampler=sampler,
    )
    started = time.perf_counter()
    try:
        report = integrability_study(
            config.p, config.schedule, config.seed, config.sampler
        )
    except ValueError as error:
        fail(str(error))
    title = f"p = {config.p:g}, {config.sampler} sampler"
    print(to_table(type(report.entries[0]), report.entries, title=title))
    finish("integrability", config, report, started)
    print(f"Verdict: [bold]{report.verdict.value}[/]")
    if expect is not None and report.verdict.value != expect:
        fail(f"Expected a {expect} verdict, got {report.verdict.value}")


def report_verdict(verdict: Verdict) -> None:
    if verdict.failed:
        fail(f"Verdict: {verdict.value}")
    colour = "green" if verdict is Verdict.MONOTONE else "yellow"
    print(f"Verdict: [{colour}]{verdict.value}[/]")
