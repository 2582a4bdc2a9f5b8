import csv
import json
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, TypeAlias

import pytest
import rich

from specular_diffusion.cli import commands
from specular_diffusion.harness import endpoint_header
from specular_diffusion.harness import output as run_output

CaptureFixture: TypeAlias = pytest.CaptureFixture[str]
MonkeyPatch: TypeAlias = pytest.MonkeyPatch


@pytest.fixture(autouse=True)
def disable_wrapping() -> None:
    """Prevents line wrapping in rich output."""
    rich.reconfigure(width=1000)


@pytest.fixture(autouse=True)
def no_user_config(tmp_path: Path, monkeypatch: MonkeyPatch) -> None:
    """Keeps the invoking user's config file out of the tests."""
    monkeypatch.setattr(commands, "user_config_file", tmp_path / "no-such-config.toml")


@pytest.fixture(autouse=True)
def runs_in_tmp_path(tmp_path: Path, monkeypatch: MonkeyPatch) -> None:
    """Run directories without --output land under the temporary path."""
    monkeypatch.setattr(run_output, "runs_dir", tmp_path / "runs")


class CliRunner:
    """Fixture class for executing our CLI with run directories under tmp_path."""

    def __init__(self, base_path: Path) -> None:
        self.base_path = base_path

    def run(self, args_str: str) -> None:
        commands.main(args_str.split())

    def path(self, name: str) -> Path:
        return self.base_path / name


@pytest.fixture
def cli(tmp_path: Path) -> Iterator[CliRunner]:
    yield CliRunner(tmp_path)


@contextmanager
def exits_with_code(code: int) -> Iterator[None]:
    try:
        yield
    except SystemExit as exit:
        assert exit.code == code
    else:
        assert False


def test_subcommands() -> None:
    assert set(commands.main.commands.keys()) == {
        "converge",
        "endpoint",
        "heat",
        "integrability",
        "simulate",
        "trace",
        "weak-residual",
    }


@pytest.mark.parametrize(
    "args",
    [
        "frobnicate",
        "trace 0.5,0",
        "trace a,b 1,0",
        "trace 1,2,3,4 1,0",
        "trace 0,0 1,0 --domain torus",
        "heat --scheme leapfrog",
        "converge --config missing.toml",
    ],
)
def test_usage_errors(cli: CliRunner, args: str) -> None:
    with exits_with_code(1):
        cli.run(args)


def test_trace(capsys: CaptureFixture, cli: CliRunner) -> None:
    directory = cli.path("trace")
    with exits_with_code(0):
        cli.run(f"trace 0,0 3,0 -o {directory}")
    out = capsys.readouterr().out
    assert "Reflections: 2" in out
    assert "Reflection point" in out
    assert (directory / "manifest.json").exists()
    report = json.loads((directory / "report.json").read_text())
    assert report["study"] == "trace"
    assert report["cycle"]["reflection_count"] == 2
    manifest = json.loads((directory / "manifest.json").read_text())
    assert manifest["command"] == "trace"


def test_trace_json(capsys: CaptureFixture, cli: CliRunner) -> None:
    directory = cli.path("trace")
    with exits_with_code(0):
        cli.run(f"trace 0,0 0,101 --json --max-points 5 -o {directory}")
    document = json.loads(capsys.readouterr().out)
    assert document["reflection_count"] == 51
    assert len(document["reflection_points"]) == 5
    assert (directory / "manifest.json").exists()


def test_trace_default_run_directory(cli: CliRunner) -> None:
    with exits_with_code(0):
        cli.run("trace 0,0 3,0")
    (directory,) = cli.path("runs").iterdir()
    assert directory.name.startswith("trace-")
    assert (directory / "manifest.json").exists()


def test_trace_ellipse(capsys: CaptureFixture, cli: CliRunner) -> None:
    with exits_with_code(0):
        cli.run("trace 0,0 3,0 --domain ellipse:2,1")
    assert "Reflections: 1" in capsys.readouterr().out


@pytest.mark.parametrize("args", ["trace 1,0 0,1", "trace 0,0 1,0,0", "trace 2,0 1,0"])
def test_trace_failures(capsys: CaptureFixture, cli: CliRunner, args: str) -> None:
    with exits_with_code(2):
        cli.run(args)
    assert capsys.readouterr().out


def test_endpoint_single(capsys: CaptureFixture, cli: CliRunner) -> None:
    directory = cli.path("endpoint")
    with exits_with_code(0):
        cli.run(f"endpoint --x 0.3,0.2 --v 0.1,-0.1 -o {directory}")
    out = capsys.readouterr().out
    assert "eta0=0.4" in out
    assert "N=0" in out
    assert (directory / "manifest.json").exists()
    report = json.loads((directory / "report.json").read_text())
    (row,) = report["rows"]
    assert row["eta0"] == pytest.approx(0.4)
    assert row["N"] == 0
    assert report["config"]["domain"] == {"kind": "unit-ball", "dim": 2}


@pytest.mark.parametrize(
    "args",
    [
        "endpoint",
        "endpoint --x 0,0",
        "endpoint --x 0,0 --v 3,0 --mode finite-difference",
    ],
)
def test_endpoint_failures(cli: CliRunner, args: str) -> None:
    with exits_with_code(2):
        cli.run(f"{args} -o {cli.path('endpoint')}")


def test_endpoint_samples_csv(cli: CliRunner) -> None:
    directory = cli.path("endpoint")
    with exits_with_code(0):
        cli.run(f"endpoint --samples 10 --seed 3 --output {directory}")
    with (directory / "endpoint.csv").open() as stream:
        rows = list(csv.reader(stream))
    assert rows[0] == endpoint_header(2)
    assert 1 <= len(rows) - 1 <= 10
    assert all(len(row) == len(rows[0]) for row in rows)
    assert (directory / "manifest.json").exists()
    manifest = json.loads((directory / "manifest.json").read_text())
    assert manifest["command"] == "endpoint"
    assert manifest["seed"] == 3


def test_endpoint_samples_3d(capsys: CaptureFixture, cli: CliRunner) -> None:
    with exits_with_code(0):
        cli.run(f"endpoint --samples 3 --dim 3 -o {cli.path('endpoint')}")
    assert "lap2=" in capsys.readouterr().out


def test_heat(cli: CliRunner) -> None:
    output = cli.path("heat")
    with exits_with_code(0):
        cli.run(f"heat --t-end 0.01 --n-r 4 --n-theta 8 --output {output}")
    assert {p.name for p in output.iterdir()} == {
        "report.json",
        "manifest.json",
        "density_t0.csv",
        "density_t0.01.csv",
    }
    report = json.loads((output / "report.json").read_text())
    assert report["mass_drift"] < 1e-12


def test_heat_3d(cli: CliRunner) -> None:
    output = cli.path("heat3")
    with exits_with_code(0):
        cli.run(f"heat --dim 3 --initial eigenmode --n-r 8 -t 0.01 -o {output}")
    report = json.loads((output / "report.json").read_text())
    assert report["config"]["mesh"]["n_theta"] == 1


def test_simulate(capsys: CaptureFixture, cli: CliRunner) -> None:
    output = cli.path("simulate")
    with exits_with_code(0):
        cli.run(f"simulate --eps 0.4 -n 500 -t 0.02 -o {output}")
    assert (output / "density_eps0.4_t0.csv").exists()
    assert (output / "density_eps0.4_t0.02.csv").exists()
    assert "Results written to" in capsys.readouterr().out


def test_converge(capsys: CaptureFixture, cli: CliRunner) -> None:
    output = cli.path("converge")
    with exits_with_code(0):
        cli.run(f"converge --eps 0.4 -n 500 -t 0.02 --seeds 2 -o {output}")
    assert (output / "density_eps0.4_t0.02.csv").exists()
    assert (output / "density_t0.02.csv").exists()
    report = json.loads((output / "report.json").read_text())
    assert report["verdict"] == "inconclusive"
    assert "inconclusive" in capsys.readouterr().out


def test_converge_config_file(cli: CliRunner) -> None:
    config = cli.path("run.toml")
    config.write_text(
        "n_particles = 400\nt_end = 0.02\nseeds = 2\n\n[mesh]\nn_r = 4\nn_theta = 8\n"
    )
    output = cli.path("configured")
    with exits_with_code(0):
        cli.run(f"converge -c {config} --eps 0.4 -o {output}")
    report = json.loads((output / "report.json").read_text())
    assert report["config"]["n_particles"] == 400
    assert report["config"]["eps"] == [0.4]


def test_converge_free_space(cli: CliRunner) -> None:
    output = cli.path("free")
    with exits_with_code(0):
        cli.run(
            "converge --boundary-mode free-space --eps 0.4 -n 500 -t 0.02 "
            f"--seeds 2 -o {output}"
        )
    report = json.loads((output / "report.json").read_text())
    assert report["reference"] == "heat-kernel"
    assert report["config"]["initial"]["kind"] == "gaussian"


def test_invalid_config_file(capsys: CaptureFixture, cli: CliRunner) -> None:
    config = cli.path("bad.toml")
    config.write_text("eps = []\n")
    with exits_with_code(2):
        cli.run(f"converge -c {config}")
    assert "Invalid configuration" in capsys.readouterr().out


def test_weak_residual(cli: CliRunner) -> None:
    output = cli.path("residual")
    with exits_with_code(0):
        cli.run(
            "weak-residual --eps 0.4 -n 500 -t 0.02 --seeds 2 "
            f"--test-functions 1,2 -o {output}"
        )
    report = json.loads((output / "report.json").read_text())
    assert [e["index"] for e in report["entries"]] == [1, 2]


def test_weak_residual_unknown_function(cli: CliRunner) -> None:
    with exits_with_code(2):
        cli.run(
            "weak-residual --eps 0.4 -n 100 -t 0.02 --test-functions 9 "
            f"-o {cli.path('bad')}"
        )


@pytest.mark.parametrize("p,verdict", [("2", "converging"), ("4", "diverging")])
def test_integrability(
    capsys: CaptureFixture, cli: CliRunner, p: str, verdict: str
) -> None:
    with exits_with_code(0):
        cli.run(f"integrability --p {p} -o {cli.path('integrability')}")
    assert f"Verdict: {verdict}" in capsys.readouterr().out


def test_integrability_expectation(capsys: CaptureFixture, cli: CliRunner) -> None:
    with exits_with_code(2):
        output = cli.path("integrability")
        cli.run(f"integrability --p 4 --expect converging -o {output}")
    assert "Expected a converging verdict" in capsys.readouterr().out


def test_integrability_invalid_exponent(cli: CliRunner) -> None:
    with exits_with_code(2):
        cli.run(f"integrability --p 0 -o {cli.path('integrability')}")
