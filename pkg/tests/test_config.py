import json

import pytest

from cablequad.config import ConfigError, RunConfig, apply_overrides, dumps, load_config, save_config


def test_defaults():
    cfg = RunConfig()
    assert cfg.sim.T == 30 and cfg.sim.dt == 1e-3
    assert cfg.cable.n == 5
    assert sorted(cfg.trials) == ["I", "II", "III"]
    assert list(cfg.trials["II"].offset) == [0.3, -0.3, 0.2]


@pytest.mark.parametrize("suffix", [".toml", ".json"])
def test_round_trip(tmp_path, suffix):
    cfg = apply_overrides(RunConfig(), dt=2e-3, seed=7, sets=["cable.n=3", "trajectory.ax=1.5"])
    path = tmp_path / f"c{suffix}"
    save_config(cfg, path)
    cfg2 = load_config(path)
    assert cfg2.to_dict() == cfg.to_dict()
    assert cfg2.cable.n == 3 and cfg2.trajectory.ax == 1.5 and cfg2.sim.dt == 2e-3


def test_overrides_win(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"sim": {"dt": 0.005, "T": 4.0}}))
    cfg = apply_overrides(load_config(path), horizon=2.0, out=str(tmp_path))
    assert cfg.sim.T == 2.0 and cfg.sim.dt == 0.005 and cfg.out == str(tmp_path)


def test_bad_keys(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"sim": {"dtt": 1.0}})
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), sets=["nosuch.key=1"])
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), sets=["cable.n"])
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"system": "blimp"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"sim": {"dt": -1.0}})
    bad = tmp_path / "bad.toml"
    bad.write_text("sim = [")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_dumps_formats():
    cfg = RunConfig()
    assert json.loads(dumps(cfg, "json"))["cable"]["n"] == 5
    assert "[cable]" in dumps(cfg, "toml")
