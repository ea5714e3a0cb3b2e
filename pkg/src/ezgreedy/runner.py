"""Multi-trial training runs and parameter sweeps, with their file outputs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import write_json
from .config import sweep_point
from .learners import run_training
from .parallel import run_trials

CURVE_COLUMNS = ["trial", "episode", "return", "discounted_return", "steps", "goal_reached"]
FIELD_INDEX = {"return": 0, "discounted_return": 1, "steps": 2, "goal_reached": 3, "greedy_return": 4}


def train_trial(cfg: dict, trial: int) -> np.ndarray:
    """Rows ``[return, discounted_return, steps, goal_reached, greedy_return]`` per episode."""
    logs = run_training(cfg["env"], cfg["learner"], cfg["exploration"], cfg["episodes"],
                        cfg["seed"], trial, cfg.get("eval_every", 0), cfg.get("stop_on_goal", False))
    out = np.full((len(logs), 5), np.nan)
    for i, l in enumerate(logs):
        out[i, :4] = (l.ret, l.discounted_return, l.steps, float(l.goal_reached))
        if l.greedy_return is not None:
            out[i, 4] = l.greedy_return
    return out


@dataclass
class ExperimentResult:
    config: dict
    curves: list  # one [episodes, 5] array per trial

    def final_mean(self, field: str = "return", fraction: Optional[float] = None,
                   last: Optional[int] = None) -> np.ndarray:
        """Per-trial mean of ``field`` over the final episodes of each trial."""
        col = FIELD_INDEX[field]
        vals = []
        for c in self.curves:
            n = c.shape[0]
            k = last if last is not None else max(1, int(math.ceil(n * (fraction or 1.0))))
            vals.append(float(np.mean(c[-k:, col])))
        return np.array(vals)

    def first_goal_episodes(self) -> list:
        out = []
        for c in self.curves:
            hit = np.flatnonzero(c[:, 3] > 0)
            out.append(int(hit[0]) + 1 if hit.size else None)
        return out

    def summary(self) -> dict:
        E = max(c.shape[0] for c in self.curves)
        ret = np.full((len(self.curves), E), np.nan)
        for i, c in enumerate(self.curves):
            ret[i, :c.shape[0]] = c[:, 0]
        counts = (~np.isnan(ret)).sum(axis=0)
        mean = [float(np.nanmean(ret[:, e])) for e in range(E)]
        median = [float(np.nanmedian(ret[:, e])) for e in range(E)]
        out = {
            "name": self.config.get("name"),
            "trials": len(self.curves),
            "episodes": self.config["episodes"],
            "seed": self.config["seed"],
            "mean_return_per_episode": mean,
            "median_return_per_episode": median,
            "trials_per_episode": counts.tolist(),
            "first_goal_episode": self.first_goal_episodes(),
            "final_10pct_mean_return": float(np.mean(self.final_mean("return", 0.1))),
        }
        if any(np.isfinite(c[:, 4]).any() for c in self.curves):
            out["final_greedy_return"] = [float(c[np.isfinite(c[:, 4]), 4][-1])
                                          if np.isfinite(c[:, 4]).any() else None for c in self.curves]
        return out


def run_experiment(cfg: dict, workers: int = 1) -> ExperimentResult:
    curves = run_trials(train_trial, [(cfg, t) for t in range(cfg["trials"])], workers)
    return ExperimentResult(cfg, curves)


def write_curves(path, result: ExperimentResult) -> None:
    with_greedy = result.config.get("eval_every", 0) > 0
    cols = CURVE_COLUMNS + (["greedy_return"] if with_greedy else [])
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for t, c in enumerate(result.curves):
            for e, row in enumerate(c):
                line = [t, e, repr(float(row[0])), repr(float(row[1])), int(row[2]), int(row[3])]
                if with_greedy:
                    line.append("" if math.isnan(row[4]) else repr(float(row[4])))
                w.writerow(line)


def save_experiment(out_dir, result: ExperimentResult) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "resolved_config.json", result.config)
    write_curves(out / "learning_curves.csv", result)
    write_json(out / "summary.json", result.summary())


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepRow:
    value: object
    mean: float
    std_error: float
    per_trial: np.ndarray


def _sweep_job(cfg: dict, trial: int, field: str, fraction: float) -> float:
    rows = train_trial(cfg, trial)
    return float(ExperimentResult(cfg, [rows]).final_mean(field, fraction)[0])


def run_sweep(sweep: dict, workers: int = 1) -> list[SweepRow]:
    """One sub-run per value; every value sees the same seeds (paired trials)."""
    field = sweep["metric"].get("field", "return")
    fraction = float(sweep["metric"].get("final_fraction", 0.1))
    points = [sweep_point(sweep, v) for v in sweep["values"]]
    trials = points[0]["trials"]
    jobs = [(p, t, field, fraction) for p in points for t in range(trials)]
    vals = np.array(run_trials(_sweep_job, jobs, workers)).reshape(len(points), trials)
    out = []
    for v, m in zip(sweep["values"], vals):
        se = float(m.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        out.append(SweepRow(v, float(m.mean()), se, m))
    return out


def save_sweep(out_dir, sweep: dict, rows: list[SweepRow]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "resolved_config.json", sweep)
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["value", "mean_metric", "std_error"])
        for r in rows:
            w.writerow([r.value, repr(r.mean), repr(r.std_error)])
