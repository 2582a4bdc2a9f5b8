"""Run directories: report JSON, density CSVs and the run manifest."""

import csv
import json
import logging
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Protocol

from .. import VERSION
from ..dirs import runs_dir
from ..mesh import ScalarField
from .config import RunConfig

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("r", "theta", "x", "y", "value")


class Report(Protocol):
    def to_json(self) -> dict[str, Any]:
        ...


def density_filename(eps: float | None, t: float) -> str:
    prefix = "density" if eps is None else f"density_eps{eps:g}"
    return f"{prefix}_t{t:g}.csv"


def write_density_csv(path: Path, field: ScalarField) -> None:
    """One row per cell: r, theta, x, y, value."""
    with path.open("w", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(CSV_COLUMNS)
        for row in field.rows():
            writer.writerow(f"{value:.17g}" for value in row)


def write_json(path: Path, document: dict[str, Any]) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n")


def git_revision() -> str | None:
    """Commit of the working directory's git checkout, if there is one."""
    try:
        result = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, check=True
        )
    except (OSError, subprocess.CalledProcessError):
        return None
    return result.stdout.strip() or None


@dataclass(frozen=True)
class Manifest:
    command: str
    config_hash: str
    seed: int
    git_revision: str | None
    wall_time: float
    """Seconds."""
    version: str = VERSION
    created: str = ""

    def to_json(self) -> dict[str, Any]:
        return vars(self).copy()


def run_directory(config: RunConfig, command: str) -> Path:
    """The configured output directory, or a fresh one under the user data directory."""
    if config.output is not None:
        path = Path(config.output)
    else:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        path = runs_dir / f"{command}-{stamp}-{config.digest()[:8]}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_run(
    directory: Path,
    command: str,
    config: RunConfig,
    report: Report,
    wall_time: float,
    densities: dict[str, ScalarField] | None = None,
) -> Manifest:
    """Write report.json, any density CSVs and manifest.json into `directory`.

    report.json depends only on the config and seed; run-specific facts such
    as the wall time live in the manifest.
    """
    write_json(directory / "report.json", report.to_json())
    for name, field in (densities or {}).items():
        write_density_csv(directory / name, field)
    manifest = Manifest(
        command=command,
        config_hash=config.digest(),
        seed=config.seed,
        git_revision=git_revision(),
        wall_time=wall_time,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    write_json(directory / "manifest.json", manifest.to_json())
    logger.debug(f"Wrote {command} results to {directory}")
    return manifest


def write_rows_csv(
    path: Path, header: list[str], rows: list[list[float | int | None]]
) -> None:
    """A header row, then one row per entry; None becomes an empty cell."""
    with path.open("w", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(header)
        for row in rows:
            writer.writerow("" if value is None else repr(value) for value in row)
