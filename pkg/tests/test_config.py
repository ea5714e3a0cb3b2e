import json

import pytest

from ezgreedy import config
from ezgreedy.config import ConfigError, deep_merge, resolve_run, resolve_sweep, set_path, sweep_point

# (preset, dotted path, expected value)
FIDELITY = [
    ("deep_sea", "learner.alpha", 1.0),
    ("deep_sea", "exploration.epsilon", "1/(N+1)"),
    ("grid_world", "learner.alpha", 0.1),
    ("grid_world", "exploration.epsilon", 0.1),
    ("mountain_car", "learner.alpha", 0.005),
    ("mountain_car", "exploration.epsilon", 0.05),
    ("mountain_car", "learner.gamma", 0.99),
    ("mountain_car", "learner.lambda", 0.9),
    ("mountain_car", "learner.order", 5),
    ("cartpole", "learner.alpha", 0.0005),
    ("cartpole", "exploration.epsilon", 0.01),
    ("cartpole", "learner.gamma", 0.99),
    ("cartpole", "learner.lambda", 0.7),
    ("cartpole", "learner.order", 7),
    ("cartpole", "learner.weight_init_variance", 0.001),
] + [(p, "exploration.distribution.mu", 2.0) for p in config.PRESETS] \
  + [(p, "exploration.distribution.cap", 10000) for p in config.PRESETS]


def get_path(cfg, path):
    for k in path.split("."):
        cfg = cfg[k]
    return cfg


class TestPresets:
    @pytest.mark.parametrize("preset,path,value", FIDELITY)
    def test_fidelity(self, preset, path, value):
        assert get_path(resolve_run(preset), path) == value

    @pytest.mark.parametrize("preset", sorted(config.PRESETS))
    def test_presets_validate(self, preset):
        cfg = resolve_run(preset)
        assert cfg["name"] == preset and cfg["seed"] == 0

    def test_sweep_values(self):
        assert config.SWEEP_PRESETS["chain_zeta"]["values"] == [1.01, 1.5, 2, 3, 4, 6]
        assert config.SWEEP_PRESETS["chain_uniform"]["values"] == [2, 5, 10, 20, 50]
        assert config.SWEEP_PRESETS["chain_geometric"]["values"] == [0.5, 0.8, 0.9, 0.95, 0.99]
        assert config.SWEEP_METRIC == {"field": "return", "final_fraction": 0.1}


class TestResolve:
    def test_override_order(self):
        cfg = resolve_run("grid_world", {"exploration": {"epsilon": 0.3}, "seed": 4}, seed=9)
        assert cfg["exploration"]["epsilon"] == 0.3
        assert cfg["exploration"]["distribution"]["mu"] == 2.0
        assert cfg["seed"] == 9

    def test_config_only(self):
        cfg = resolve_run(None, {"env": {"kind": "chain"}, "learner": {"kind": "q_learning"},
                                 "exploration": {"policy": "eps_greedy"}, "episodes": 3})
        assert cfg["trials"] == 1 and cfg["eval_every"] == 0

    @pytest.mark.parametrize("bad", [
        {"episodes": 0},
        {"env": {"kind": "atari"}},
        {"learner": {"alpha": -1}},
        {"exploration": {"epsilon": 2.0}},
        {"exploration": {"distribution": {"kind": "cauchy"}}},
        {"exploration": {"typo": 1}},
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            resolve_run("grid_world", bad)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            resolve_run("pong")

    def test_load_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"episodes": 2}))
        assert config.load_json(p) == {"episodes": 2}
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            config.load_json(p)
        with pytest.raises(ConfigError):
            config.load_json(tmp_path / "missing.json")


class TestSweep:
    def test_resolve_and_points(self):
        sw = resolve_sweep("chain_uniform", {"trials": 3}, seed=5)
        assert sw["resolved_base"]["trials"] == 3 and sw["seed"] == 5
        pt = sweep_point(sw, 20)
        assert pt["exploration"]["distribution"] == {"kind": "uniform", "cap": 10000, "N": 20}
        assert pt["seed"] == 5

    def test_all_points_share_seed(self):
        sw = resolve_sweep("chain_zeta")
        assert {sweep_point(sw, v)["seed"] for v in sw["values"]} == {0}

    def test_empty_values(self):
        with pytest.raises(ConfigError):
            resolve_sweep("chain_zeta", {"values": []})

    def test_inline_base(self):
        base = {"env": {"kind": "chain", "num_blocks": 3}, "learner": {"kind": "q_learning"},
                "exploration": {"policy": "ez_greedy", "epsilon": 0.1}, "episodes": 5}
        sw = resolve_sweep(None, {"base": base, "path": "exploration.epsilon", "values": [0.1, 0.2]})
        assert sweep_point(sw, 0.2)["exploration"]["epsilon"] == 0.2


def test_deep_merge_does_not_alias():
    a = {"x": {"y": 1}}
    out = deep_merge(a, {"x": {"z": 2}})
    out["x"]["y"] = 5
    assert a == {"x": {"y": 1}}


def test_set_path_creates():
    d = {}
    set_path(d, "a.b.c", [1])
    assert d == {"a": {"b": {"c": [1]}}}
