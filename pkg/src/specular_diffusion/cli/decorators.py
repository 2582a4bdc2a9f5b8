from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import rich_click as click
from rich_click import option

from ..kinetic.ensemble import BOUNDARY_MODES
from .params import FloatListParam

F = TypeVar("F", bound=Callable[..., Any])


def apply(function: F, decorators: list[Callable[[Any], Any]]) -> F:
    for decorator in reversed(decorators):
        function = decorator(function)
    return function


def config_options(function: F) -> F:
    """Options shared by every command that writes a run directory."""
    return apply(
        function,
        [
            option(
                "--config",
                "-c",
                "config_path",
                type=click.Path(exists=True, dir_okay=False, path_type=Path),
                help="TOML or JSON run configuration. Flags override its values.",
            ),
            option(
                "--output",
                "-o",
                type=click.Path(file_okay=False, path_type=Path),
                help="Directory for report.json, manifest.json and CSV files.",
            ),
        ],
    )


def run_options(function: F) -> F:
    """Run directory options plus the base seed."""
    return apply(
        config_options(function),
        [option("--seed", "-s", type=int, help="Base random seed.")],
    )


def study_options(function: F) -> F:
    """Options shared by the studies sweeping over ε."""
    return apply(
        function,
        [
            option(
                "--eps",
                "-e",
                type=FloatListParam(),
                help="Comma-separated Knudsen numbers.",
            ),
            option("--n-particles", "-n", type=int, help="Particles per run."),
            option("--t-end", "-t", type=float, help="Final time."),
            option("--seeds", type=int, help="Independent runs per ε."),
            option(
                "--boundary-mode",
                type=click.Choice(BOUNDARY_MODES),
                help="Reflecting unit ball or free space.",
            ),
            option("--workers", "-w", type=int, help="Parallel worker processes."),
        ],
    )
