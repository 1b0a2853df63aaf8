"""Run configuration defaults, file loading and validation."""

from __future__ import annotations

import json

import pytest

from config import BUNDLED_GRID, RunConfig, SsaSettings, config_from_dict, load_run_config
from exceptions import ConfigValidationError, MissingConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("QUENCH_SEED", "QUENCH_GRID_PATH", "QUENCH_OUTPUT_DIR", "QUENCH_WORKERS"):
        monkeypatch.delenv(name, raising=False)


def test_defaults():
    run_config = RunConfig()
    assert run_config.grid_path == BUNDLED_GRID
    assert run_config.seed is None
    assert run_config.workers == 1
    assert run_config.ssa.population_size == 25
    assert run_config.ssa.iterations == 100
    assert run_config.cost.loss_price == 168.0
    assert run_config.placement.omega == 10.0
    assert run_config.placement.trigger_current_a == 700.0
    assert run_config.fault.subtransient_scale == 0.1


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("QUENCH_SEED", "42")
    monkeypatch.setenv("QUENCH_WORKERS", "3")
    run_config = RunConfig()
    assert run_config.seed == 42
    assert run_config.workers == 3


@pytest.mark.parametrize("name", ["QUENCH_SEED", "QUENCH_WORKERS"])
def test_malformed_environment_integer_is_a_config_error(monkeypatch, name):
    monkeypatch.setenv(name, "abc")
    with pytest.raises(ConfigValidationError) as excinfo:
        RunConfig()
    assert excinfo.value.config_key == name
    assert "abc" in str(excinfo.value)


def test_environment_is_read_when_config_is_built(monkeypatch):
    monkeypatch.setenv("QUENCH_SEED", "5")
    first = RunConfig()
    monkeypatch.setenv("QUENCH_SEED", "6")
    assert (first.seed, RunConfig().seed) == (5, 6)


def test_missing_seed_is_required():
    with pytest.raises(MissingConfigError) as info:
        RunConfig().require_valid()
    assert info.value.config_key == "seed"


def test_valid_with_seed():
    assert RunConfig(seed=0).require_valid().seed == 0


def test_out_of_range_seed():
    issues = RunConfig(seed=2**64).validate()
    assert any("64-bit" in issue for issue in issues)


def test_section_validation_collects_issues():
    run_config = RunConfig(seed=1, ssa=SsaSettings(population_size=2, levy_probability=2.0))
    issues = run_config.validate()
    assert "ssa.population_size must be >= 4" in issues
    assert "ssa.levy_probability must lie in [0, 1]" in issues
    with pytest.raises(ConfigValidationError):
        run_config.require_valid()


def test_from_dict_sections():
    run_config = config_from_dict({
        "seed": 9,
        "ssa": {"population_size": 10, "iterations": 5},
        "placement": {"omega": 2.5, "candidates": [1, 2]},
    })
    assert run_config.seed == 9
    assert run_config.ssa.population_size == 10
    assert run_config.placement.omega == 2.5
    assert run_config.placement.candidates == [1, 2]
    assert run_config.cost.loss_price == 168.0


def test_unknown_top_level_key():
    with pytest.raises(ConfigValidationError, match="bogus"):
        config_from_dict({"bogus": 1})


def test_unknown_section_key():
    with pytest.raises(ConfigValidationError) as info:
        config_from_dict({"ssa": {"swarm": 3}})
    assert info.value.config_key == "ssa"


def test_file_with_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 1, "ssa": {"iterations": 7}}), encoding="utf-8")
    run_config = load_run_config(path, {"seed": 5, "output_dir": tmp_path / "out", "grid_path": None})
    assert run_config.seed == 5
    assert run_config.ssa.iterations == 7
    assert run_config.output_dir == tmp_path / "out"
    assert run_config.grid_path == BUNDLED_GRID


def test_missing_file(tmp_path):
    with pytest.raises(MissingConfigError):
        load_run_config(tmp_path / "absent.json")


def test_invalid_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{\n  \"seed\": ,\n}", encoding="utf-8")
    with pytest.raises(ConfigValidationError) as info:
        load_run_config(path)
    assert info.value.details["line"] == 2


def test_unsupported_override():
    with pytest.raises(ConfigValidationError, match="ssa"):
        load_run_config(None, {"ssa": 3})


def test_to_dict_is_json_ready():
    data = RunConfig(seed=3).to_dict()
    assert json.loads(json.dumps(data)) == data
    assert data["placement"]["z_max_ohm"] == 20.0
