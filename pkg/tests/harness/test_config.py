from pathlib import Path

import pytest
import tomlkit

from specular_diffusion.harness import RunConfig
from specular_diffusion.harness.config import read_table


def test_defaults() -> None:
    config = RunConfig()
    assert config.build_domain().dim == 2
    assert config.build_mesh().n_theta == 16
    assert config.build_initial().kind == "bump"
    assert config.step_for(0.4) == pytest.approx(0.02)
    assert config.replica_seeds() == [0, 1, 2]


def test_defaults_3d() -> None:
    config = RunConfig(dim=3)
    assert config.build_mesh().n_theta == 1
    assert config.build_initial().center == (0.4, 0.0, 0.0)
    assert config.build_domain().dim == 3


def test_explicit_dt() -> None:
    assert RunConfig(dt=1e-3).step_for(0.1) == 1e-3


def test_overrides_ignore_none() -> None:
    config = RunConfig(seed=4).with_overrides(eps=(0.1,), seed=None)
    assert config.eps == (0.1,)
    assert config.seed == 4


def test_unknown_key() -> None:
    with pytest.raises(RunConfig.ParseError, match="Unknown config keys"):
        RunConfig.from_mapping({"epsilon": [0.1]})


@pytest.mark.parametrize(
    "values",
    [
        {"eps": []},
        {"eps": [0.1, -0.1]},
        {"dim": 4},
        {"n_particles": 0},
        {"schedule": [1000, 1000]},
        {"sampler": "importance"},
        {"moment_order": 5},
        {"initial": {"kind": "delta"}},
        {"mesh": {"n_r": 0}},
        {"domain": {"kind": "level-set", "builtin": "ellipse", "semi_axes": [2, 1, 1]}},
    ],
)
def test_invalid(values: dict[str, object]) -> None:
    with pytest.raises(RunConfig.ParseError):
        RunConfig.from_mapping(values)


def test_load_toml(tmp_path: Path) -> None:
    path = tmp_path / "run.toml"
    path.write_text(
        """
eps = [0.2, 0.1]
seed = 7

[mesh]
n_r = 4
n_theta = 8

[initial]
kind = "uniform"
"""
    )
    config = RunConfig.load(path)
    assert config.eps == (0.2, 0.1)
    assert config.seed == 7
    assert config.build_mesh().size == 1 + 3 * 8
    assert config.build_initial().kind == "uniform"


def test_load_json(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(
        '{"eps": [0.3], "boundary_mode": "free-space", '
        '"initial": {"kind": "gaussian"}}'
    )
    config = RunConfig.load(path)
    assert config.boundary_mode == "free-space"
    assert config.build_initial().center == (0.0, 0.0)


def test_malformed_file(tmp_path: Path) -> None:
    path = tmp_path / "broken.toml"
    path.write_text("eps = [0.1,")
    with pytest.raises(RunConfig.ParseError):
        read_table(path)
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    with pytest.raises(RunConfig.ParseError, match="table"):
        read_table(path)


def test_merged_with(tmp_path: Path) -> None:
    base = RunConfig(seed=3)
    assert base.merged_with(None) is base
    assert base.merged_with(tmp_path / "missing.toml") is base
    path = tmp_path / "layer.toml"
    path.write_text("n_particles = 1000\n")
    merged = base.merged_with(path)
    assert merged.n_particles == 1000
    assert merged.seed == 3


def test_digest() -> None:
    assert RunConfig().digest() == RunConfig().digest()
    assert RunConfig().digest() != RunConfig(seed=1).digest()
    # Defaults made explicit do not change the digest.
    explicit = RunConfig(mesh={"n_r": 8, "n_theta": 16, "radius": 1.0})
    assert RunConfig().digest() == explicit.digest()


def test_resolved() -> None:
    resolved = RunConfig(eps=(0.4,), seeds=2).resolved()
    assert resolved["dt_by_eps"] == {"0.4": pytest.approx(0.02)}
    assert resolved["seed_list"] == [0, 1]
    assert resolved["mesh"]["n_theta"] == 16


def test_toml_round_trip() -> None:
    config = RunConfig(eps=(0.2, 0.1), seed=5, initial={"kind": "eigenmode"})
    reloaded = RunConfig.from_mapping(tomlkit.loads(config.to_toml()).unwrap())
    assert reloaded.digest() == config.digest()
