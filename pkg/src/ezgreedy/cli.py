"""Command line entry point: ``ezgreedy {run,sweep,first-visit,cover-time,coverage}``."""

from __future__ import annotations

import argparse
import copy
import logging
import sys
import time
from pathlib import Path

from . import analysis, config, kernels, runner
from .distributions import from_dict
from .envs import EnvError, make_env
from .exploration import OptionSpec, primitive_options, repeat_options
from .learners import DivergenceError
from .rng import Xoshiro256, STREAM_ENV

log = logging.getLogger("ezgreedy")

PURE_EXPLORATION = {
    "eps_greedy": {"policy": "eps_greedy", "epsilon": 1.0},
    "ez_greedy": {"policy": "ez_greedy", "epsilon": 1.0, "distribution": dict(config.ZETA_DEFAULT)},
}


def _load(args) -> dict:
    return config.load_json(args.config) if args.config else {}


def _explorations(cfg: dict) -> dict:
    if "explorations" in cfg:
        return cfg["explorations"]
    eps = cfg.get("epsilon", 1.0)
    out = copy.deepcopy(PURE_EXPLORATION)
    for v in out.values():
        v["epsilon"] = eps
        if "greedy_action" in cfg:
            v["greedy_action"] = cfg["greedy_action"]
    if "distribution" in cfg:
        out["ez_greedy"]["distribution"] = cfg["distribution"]
    return out


def cmd_run(args) -> int:
    cfg = config.resolve_run(args.preset, _load(args), args.seed)
    t0 = time.perf_counter()
    result = runner.run_experiment(cfg, args.workers)
    runner.save_experiment(args.out, result)
    log.info("run: %d trials in %.1fs -> %s", cfg["trials"], time.perf_counter() - t0, args.out)
    return 0


def cmd_sweep(args) -> int:
    sweep = config.resolve_sweep(args.preset, _load(args), args.seed)
    rows = runner.run_sweep(sweep, args.workers)
    runner.save_sweep(args.out, sweep, rows)
    for r in rows:
        log.info("sweep %s=%s: %.4f +- %.4f", sweep["path"], r.value, r.mean, r.std_error)
    return 0


def cmd_first_visit(args) -> int:
    cfg = _load(args)
    if args.preset:
        if args.preset not in analysis.FIRST_VISIT_PRESETS:
            raise config.ConfigError(f"unknown first-visit preset {args.preset!r}; "
                                     f"choose from {sorted(analysis.FIRST_VISIT_PRESETS)}")
        base = copy.deepcopy(analysis.FIRST_VISIT_PRESETS[args.preset])
        if "steps" not in base:
            base["steps"] = base.pop("steps_per_N") * int(base["env"].get("N", 20))
        cfg = config.deep_merge(base, cfg)
    for key in ("env", "trials", "steps"):
        if key not in cfg:
            raise config.ConfigError(f"first-visit config needs {key!r}")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    cfg["seed"] = seed
    cfg["explorations"] = _explorations(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_json(out / "resolved_config.json", cfg)
    for name, ex in cfg["explorations"].items():
        grid = analysis.first_visit_map(cfg["env"], ex, int(cfg["trials"]), int(cfg["steps"]),
                                        cfg.get("discretization"), cfg.get("scale", "linear"), seed,
                                        args.workers)
        grid.save(out / f"first_visit_{name}")
        log.info("first-visit %s: max mean %.1f", name, float(grid.mean.max()))
    return 0


def cmd_cover_time(args) -> int:
    cfg = _load(args)
    if args.preset:
        if args.preset not in config.COVER_TIME_PRESETS:
            raise config.ConfigError(f"unknown cover-time preset {args.preset!r}")
        cfg = config.deep_merge(config.COVER_TIME_PRESETS[args.preset], cfg)
    if "env" not in cfg:
        raise config.ConfigError("cover-time config needs 'env'")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    cfg["seed"] = seed
    cfg["explorations"] = _explorations(cfg)
    trials, budget = int(cfg.get("trials", 101)), int(cfg.get("budget", 10**7))
    reports = {}
    for name, ex in cfg["explorations"].items():
        rep = analysis.cover_time(cfg["env"], ex, trials, budget, seed, workers=args.workers)
        reports[name] = rep.to_dict()
        log.info("cover-time %s: median %s (%d/%d covered)", name, rep.median, rep.covered_trials, trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_json(out / "resolved_config.json", cfg)
    analysis.write_json(out / "cover_time.json", reports)
    return 0


def build_options(spec, num_actions: int, truncation=None) -> list[OptionSpec]:
    if isinstance(spec, list):
        return [OptionSpec(int(o["action"]), o.get("length"), o.get("beta")) for o in spec]
    kind = spec.get("kind")
    if kind == "primitive":
        return primitive_options(num_actions)
    if kind == "fixed_length":
        return [OptionSpec.after_exactly(a, int(spec["length"])) for a in range(num_actions)]
    if kind == "repeat":
        return repeat_options(num_actions, from_dict(spec["distribution"]), truncation)
    raise config.ConfigError(f"unknown option set kind {kind!r}")


def cmd_coverage(args) -> int:
    cfg = _load(args)
    if args.preset:
        if args.preset not in config.COVERAGE_PRESETS:
            raise config.ConfigError(f"unknown coverage preset {args.preset!r}; "
                                     f"choose from {sorted(config.COVERAGE_PRESETS)}")
        cfg = config.deep_merge(config.COVERAGE_PRESETS[args.preset], cfg)
    for key in ("env", "options"):
        if key not in cfg:
            raise config.ConfigError(f"coverage config needs {key!r}")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    env = make_env(cfg["env"], rng=Xoshiro256.for_trial(seed, 0, STREAM_ENV))
    trunc = cfg.get("truncation")
    options = build_options(cfg["options"], env.num_actions, trunc)
    g = cfg.get("greedy_action")
    greedy = None if g is None else [int(g)] * env.num_states
    res = analysis.coverage_check(env, options, float(cfg.get("epsilon", 1.0)), greedy, trunc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_json(out / "resolved_config.json", cfg)
    analysis.write_json(out / "coverage.json", res.to_dict())
    log.info("coverage: %d unreachable pairs", len(res.unreachable))
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "first-visit": cmd_first_visit,
            "cover-time": cmd_cover_time, "coverage": cmd_coverage}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ezgreedy", description="Temporally-extended epsilon-greedy experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON config (merged over the preset)")
        s.add_argument("--preset", help="named preset")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--workers", type=int, default=1, help="worker processes for trials")
        s.add_argument("--seed", type=int, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    if args.command in ("run", "sweep") and not (args.preset or args.config):
        print("error: give --preset or --config", file=sys.stderr)
        return 2
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return COMMANDS[args.command](args)
    except config.ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, EnvError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DivergenceError as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
