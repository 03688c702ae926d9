from __future__ import annotations

import os
from pathlib import Path

import pytest

from app.v1.core.config import RunConfig, load_config
from app.v1.core.exceptions import ConfigError


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """No stray ROR_* variables or .env file from the developer's shell."""
    monkeypatch.chdir(tmp_path)
    for name in list(os.environ):
        if name.upper().startswith("ROR_"):
            monkeypatch.delenv(name)


def _toml(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_describe_the_reference_plant():
    config = load_config()
    assert config.FLOW_CSV is None
    assert config.FORECAST_LENGTHS == [0, 5, 10]
    assert config.RELAXATION_DAYS == 20
    assert config.COST_RATIO == 0.01
    assert config.units == (config.UNIT,)
    assert config.UNIT.q_max == 13.0
    assert config.SWEEP_RATIOS[0] == 0.002
    assert config.SWEEP_RATIOS[-1] == 0.03
    assert len(config.SWEEP_RATIOS) == 15


def test_solver_settings_follow_config():
    settings = load_config(grid_nodes=101, total_tol_rel=1e-5).solver_settings()
    assert settings.grid_nodes == 101
    assert settings.total_tol_rel == 1e-5
    assert settings.absolute_tolerances(2.0e6) == pytest.approx((0.02, 20.0))


def test_toml_keys_are_case_insensitive(tmp_path):
    path = _toml(
        tmp_path,
        'flow_csv = "flows.csv"\n'
        "homogeneous_pair = true\n"
        "forecast_lengths = [0, 3]\n"
        "[unit]\n"
        "q_max = 14.0\n",
    )
    config = load_config(path)
    assert config.FLOW_CSV == Path("flows.csv")
    assert config.FORECAST_LENGTHS == [0, 3]
    assert len(config.units) == 2
    assert config.units[0] == config.units[1]
    assert config.UNIT.q_max == 14.0


def test_overrides_win_over_file_and_file_over_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ROR_GRID_NODES", "151")
    monkeypatch.setenv("ROR_SEED", "11")
    path = _toml(tmp_path, "grid_nodes = 101\n")
    assert load_config().GRID_NODES == 151
    config = load_config(path)
    assert config.GRID_NODES == 101
    assert config.SEED == 11
    assert load_config(path, grid_nodes=81).GRID_NODES == 81


def test_none_overrides_are_ignored(tmp_path):
    config = load_config(_toml(tmp_path, 'output_dir = "runs"\n'), output_dir=None)
    assert config.OUTPUT_DIR == Path("runs")


def test_nested_unit_fields_from_environment(monkeypatch):
    monkeypatch.setenv("ROR_UNIT__Q_MAX", "15")
    assert load_config().UNIT.q_max == 15.0


def test_log_level_is_normalised():
    assert load_config(log_level="debug").LOG_LEVEL == "DEBUG"


@pytest.mark.parametrize(
    ("overrides", "fragment"),
    [
        ({"window_days": 6}, "WINDOW_DAYS"),
        ({"forecast_lengths": [0, 400]}, "FORECAST_LENGTHS"),
        ({"backtest_years": (2018, 2015)}, "reversed"),
        ({"log_level": "LOUD"}, "LOG_LEVEL"),
        ({"sweep_ratios": [0.01, -0.01]}, "non-negative"),
        ({"price": 0.0}, "PRICE"),
        ({"homogeneous_pair": True, "unit2": {"q_max": 15.0}}, "not both"),
        ({"switch_costs": [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]}, "2x2"),
        ({"switch_costs": [[1.0, 1.0], [1.0, 0.0]]}, "diagonal"),
        ({"unit": {"q_min": 12.0, "q_d": 10.0}}, "q_min"),
    ],
)
def test_invalid_settings_raise_config_error(overrides, fragment):
    with pytest.raises(ConfigError, match=fragment) as info:
        load_config(**overrides)
    assert info.value.exit_code == 2


def test_explicit_costs_match_two_unit_plant():
    config = load_config(
        homogeneous_pair=True,
        switch_costs=[[0.0, 1.0, 1.5], [1.0, 0.0, 1.0], [1.5, 1.0, 0.0]],
    )
    assert len(config.SWITCH_COSTS) == 3


def test_unreadable_files_raise_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        load_config(_toml(tmp_path, "grid_nodes = = 3\n"))


def test_require_inputs(tmp_path):
    config = RunConfig()
    with pytest.raises(ConfigError, match="FLOW_CSV is not set"):
        config.require_inputs("FLOW_CSV")
    with pytest.raises(ConfigError, match="does not exist"):
        RunConfig(FLOW_CSV=tmp_path / "absent.csv").require_inputs("FLOW_CSV")
    present = tmp_path / "flows.csv"
    present.write_text("date,flow\n", encoding="utf-8")
    RunConfig(FLOW_CSV=present).require_inputs("FLOW_CSV")
