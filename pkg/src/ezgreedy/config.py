"""Experiment configuration: presets, schema validation and merging."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Optional

import jsonschema

ZETA_DEFAULT = {"kind": "zeta", "mu": 2.0, "cap": 10000}

# Training presets: environment, learner and exploration settings per task,
# with episode and trial counts.
PRESETS: dict[str, dict] = {
    "deep_sea": {
        "env": {"kind": "deep_sea", "N": 20, "randomized": False, "step_cost": "right"},
        "learner": {"kind": "q_learning", "alpha": 1.0, "gamma": 0.99},
        "exploration": {"policy": "ez_greedy", "epsilon": "1/(N+1)", "distribution": dict(ZETA_DEFAULT)},
        "episodes": 10000, "trials": 5, "eval_every": 100,
    },
    "grid_world": {
        "env": {"kind": "grid_world", "width": 23, "height": 23, "max_episode_steps": 1000},
        "learner": {"kind": "q_learning", "alpha": 0.1, "gamma": 0.99},
        "exploration": {"policy": "ez_greedy", "epsilon": 0.1, "distribution": dict(ZETA_DEFAULT)},
        "episodes": 5000, "trials": 30,
    },
    "mountain_car": {
        "env": {"kind": "mountain_car_sparse", "max_episode_steps": 5000},
        "learner": {"kind": "sarsa_lambda", "alpha": 0.005, "gamma": 0.99, "lambda": 0.9, "order": 5,
                    "weight_init_variance": 0.0},
        "exploration": {"policy": "ez_greedy", "epsilon": 0.05, "distribution": dict(ZETA_DEFAULT)},
        "episodes": 5000, "trials": 30,
    },
    "cartpole": {
        "env": {"kind": "cartpole_swingup_sparse", "max_episode_steps": 1000},
        "learner": {"kind": "sarsa_lambda", "alpha": 0.0005, "gamma": 0.99, "lambda": 0.7, "order": 7,
                    "weight_init_variance": 0.001},
        "exploration": {"policy": "ez_greedy", "epsilon": 0.01, "distribution": dict(ZETA_DEFAULT)},
        "episodes": 500, "trials": 30,
    },
    "chain": {
        "env": {"kind": "chain", "num_blocks": 20},
        "learner": {"kind": "q_learning", "alpha": 0.5, "gamma": 0.99},
        "exploration": {"policy": "ez_greedy", "epsilon": 0.1, "distribution": dict(ZETA_DEFAULT)},
        "episodes": 1000, "trials": 50,
    },
}

# Duration sweeps on the chain, one per distribution family.
SWEEP_PRESETS: dict[str, dict] = {
    "chain_zeta": {"base": "chain", "path": "exploration.distribution.mu",
                   "set": {"exploration.distribution": {"kind": "zeta", "cap": 10000, "allow_heavy": True}},
                   "values": [1.01, 1.5, 2, 3, 4, 6]},
    "chain_uniform": {"base": "chain", "path": "exploration.distribution.N",
                      "set": {"exploration.distribution": {"kind": "uniform", "cap": 10000}},
                      "values": [2, 5, 10, 20, 50]},
    "chain_geometric": {"base": "chain", "path": "exploration.distribution.lambda",
                        "set": {"exploration.distribution": {"kind": "geometric", "cap": 10000}},
                        "values": [0.5, 0.8, 0.9, 0.95, 0.99]},
}
SWEEP_METRIC = {"field": "return", "final_fraction": 0.1}

# Analysis presets: both policies are evaluated under pure exploration.
COVERAGE_PRESETS: dict[str, dict] = {
    "chain_multiples": {"env": {"kind": "chain", "num_blocks": 4}, "options": {"kind": "fixed_length", "length": 3},
                        "epsilon": 1.0},
    "grid_world_primitive": {"env": {"kind": "grid_world"}, "options": {"kind": "primitive"}, "epsilon": 0.1},
    "grid_world_zeta": {"env": {"kind": "grid_world"},
                        "options": {"kind": "repeat", "distribution": dict(ZETA_DEFAULT)}, "epsilon": 0.1},
    "deep_sea_zeta": {"env": {"kind": "deep_sea", "N": 10},
                      "options": {"kind": "repeat", "distribution": dict(ZETA_DEFAULT)}, "epsilon": 0.1},
}
COVER_TIME_PRESETS: dict[str, dict] = {
    "open_grid": {"env": {"kind": "open_grid", "width": 23, "height": 23}, "trials": 101, "budget": 20_000_000,
                  "epsilon": 1.0, "distribution": dict(ZETA_DEFAULT)},
}

_DIST = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["zeta", "uniform", "geometric", "fixed"]},
        "mu": {"type": "number"}, "N": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n": {"type": "integer", "minimum": 1}, "cap": {"type": "integer", "minimum": 1},
        "allow_heavy": {"type": "boolean"},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "required": ["env", "learner", "exploration", "episodes"],
    "properties": {
        "name": {"type": "string"},
        "env": {
            "type": "object", "required": ["kind"],
            "properties": {
                "kind": {"enum": ["chain", "deep_sea", "grid_world", "open_grid", "mountain_car_sparse",
                                  "cartpole_swingup_sparse", "mountain_car", "cartpole"]},
                "max_episode_steps": {"type": "integer", "minimum": 1},
                "num_blocks": {"type": "integer", "minimum": 1},
                "N": {"type": "integer", "minimum": 1},
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 2},
            },
        },
        "learner": {
            "type": "object", "required": ["kind"],
            "properties": {"kind": {"enum": ["q_learning", "sarsa_lambda"]},
                           "alpha": {"type": "number", "exclusiveMinimum": 0},
                           "gamma": {"type": "number", "minimum": 0, "maximum": 1},
                           "lambda": {"type": "number", "minimum": 0, "maximum": 1},
                           "order": {"type": "integer", "minimum": 0},
                           "weight_init_variance": {"type": "number", "minimum": 0}},
        },
        "exploration": {
            "type": "object",
            "properties": {"policy": {"enum": ["eps_greedy", "ez_greedy"]},
                           "epsilon": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1},
                                                 {"type": "string"}]},
                           "distribution": _DIST,
                           "pseudocode_literal": {"type": "boolean"},
                           "greedy_action": {"type": "integer", "minimum": 0}},
            "additionalProperties": False,
        },
        "episodes": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "eval_every": {"type": "integer", "minimum": 0},
        "stop_on_goal": {"type": "boolean"},
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["base", "path", "values"],
    "properties": {
        "base": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "path": {"type": "string"},
        "set": {"type": "object"},
        "values": {"type": "array", "minItems": 1},
        "metric": {"type": "object",
                   "properties": {"field": {"enum": ["return", "discounted_return", "steps", "goal_reached"]},
                                  "final_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}}},
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
    },
}


class ConfigError(ValueError):
    pass


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(cfg: dict, path: str, value) -> None:
    keys = path.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = copy.deepcopy(value)


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e


def validate(cfg: dict, schema: dict) -> None:
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}") from None


def resolve_run(preset: Optional[str] = None, config: Optional[dict] = None,
                seed: Optional[int] = None) -> dict:
    """Preset, then config file values, then an explicit seed, validated."""
    cfg: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = copy.deepcopy(PRESETS[preset])
        cfg["name"] = preset
    if config:
        cfg = deep_merge(cfg, config)
    cfg.setdefault("trials", 1)
    cfg.setdefault("seed", 0)
    cfg.setdefault("eval_every", 0)
    cfg.setdefault("stop_on_goal", False)
    if seed is not None:
        cfg["seed"] = int(seed)
    validate(cfg, RUN_SCHEMA)
    return cfg


def resolve_sweep(preset: Optional[str] = None, config: Optional[dict] = None,
                  seed: Optional[int] = None) -> dict:
    cfg: dict = {}
    if preset is not None:
        if preset not in SWEEP_PRESETS:
            raise ConfigError(f"unknown sweep preset {preset!r}; choose from {sorted(SWEEP_PRESETS)}")
        cfg = copy.deepcopy(SWEEP_PRESETS[preset])
    if config:
        cfg = deep_merge(cfg, config)
    cfg.setdefault("metric", dict(SWEEP_METRIC))
    validate(cfg, SWEEP_SCHEMA)
    base = cfg["base"]
    base_cfg = resolve_run(base if isinstance(base, str) else None,
                           None if isinstance(base, str) else base)
    for path, value in cfg.get("set", {}).items():
        set_path(base_cfg, path, value)
    if "trials" in cfg:
        base_cfg["trials"] = cfg["trials"]
    if seed is not None:
        cfg["seed"] = int(seed)
    base_cfg["seed"] = int(cfg.get("seed", base_cfg["seed"]))
    cfg["resolved_base"] = base_cfg
    cfg["seed"] = base_cfg["seed"]
    return cfg


def sweep_point(sweep: dict, value) -> dict:
    cfg = copy.deepcopy(sweep["resolved_base"])
    set_path(cfg, sweep["path"], value)
    validate(cfg, RUN_SCHEMA)
    return cfg
