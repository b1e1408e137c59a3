import json

import pytest

from ecoplus.config import (
    THREADS_ENV, ConfigFile, apply_overrides, effective_config, load_config, parse_config, sweep_workers,
)
from ecoplus.errors import ConfigError
from ecoplus.models import CpemParams, KmmkParams, PwaMode, Strategy, StrategyKind


def test_defaults(cfg):
    assert cfg.road.length == 100.0
    assert cfg.limits.v_max == 15.0
    assert (cfg.limits.u_min, cfg.limits.u_max) == (-3.5, 2.5)
    assert (cfg.limits.j_min, cfg.limits.j_max) == (-10.0, 10.0)
    assert cfg.experiment.vd == [6.0, 8.0, 10.0]
    assert cfg.experiment.strategies == ["ecoplus", "vm", "jm", "am", "dc"]
    assert cfg.pwa.segments == 5 and cfg.pwa.oracle_segments == 500
    assert cfg.safety.min_gap == 2.0 and cfg.safety.time_gap == 4.0
    assert isinstance(cfg.vehicle, CpemParams)


def test_toml_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        '[experiment]\nmodel = "kmmk"\nstrategies = ["ECO+", "vm_l1", "ecoplus_oracle"]\nvd = [8.0]\n'
        "[road]\nlength = 120.0\n"
    )
    cfg = load_config(path)
    assert isinstance(cfg.vehicle, KmmkParams)
    assert cfg.experiment.strategies == ["ecoplus", "vm_l1", "ecoplus-oracle"]
    assert cfg.road.length == 120.0
    oracle = cfg.experiment.parsed_strategies[2]
    assert oracle.kind is StrategyKind.ECO_PLUS and oracle.mode is PwaMode.FINE_PWA_ORACLE


def test_unknown_key_is_a_config_error(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[road]\nlenght = 100.0\n")
    with pytest.raises(ConfigError, match="road.lenght"):
        load_config(path)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    path = tmp_path / "bad.toml"
    path.write_text("[road\n")
    with pytest.raises(ConfigError):
        load_config(path)


@pytest.mark.parametrize("data", [
    {"experiment": {"strategies": ["fastest"]}},
    {"experiment": {"vd": [20.0]}},
    {"experiment": {"tm_min": 40.0}},
    {"limits": {"u_min": 1.0}},
    {"safety": {"leader_stop_time": 20.0, "leader_hold": 2.0}},
])
def test_invalid_values(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_overrides(cfg):
    out = apply_overrides(cfg, {"experiment.tm_max": 20.0, "pwa.segments": 8, "experiment.model": None})
    assert out.experiment.tm_max == 20.0
    assert out.pwa.segments == 8
    assert out.experiment.model == "cpem"
    with pytest.raises(ConfigError, match="unknown configuration key"):
        apply_overrides(cfg, {"experiment.tmax": 20.0})
    with pytest.raises(ConfigError, match="unknown configuration section"):
        apply_overrides(cfg, {"nothing.here": 1})


def test_effective_config_is_json(cfg):
    data = effective_config(cfg)
    assert json.loads(json.dumps(data)) == data
    assert data["experiment"]["dt"] == 0.1


def test_sweep_workers(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert sweep_workers() == 3
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(ConfigError):
        sweep_workers()
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        sweep_workers()
    monkeypatch.delenv(THREADS_ENV)
    assert sweep_workers() >= 1


def test_strategy_labels():
    assert Strategy.parse("ECO+").label == "ecoplus"
    assert Strategy.parse("oracle").label == "ecoplus-oracle"
    with pytest.raises(ValueError, match="unknown strategy"):
        Strategy.parse("cruise")
    assert isinstance(ConfigFile().solver.tol, float)
