"""First-visit maps, cover times, coverage reachability and sequence-probability checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .envs import Env, EnvError, TabularEnv, TabularModel, make_env
from .exploration import ExplorationState, OptionSpec
from .learners import make_explorer
from .parallel import run_trials
from .rng import STREAM_ENV, STREAM_EXPLORE, Xoshiro256

# Trial counts, step budgets and scales for the standard first-visit plots.
FIRST_VISIT_PRESETS = {
    "deep_sea": {"env": {"kind": "deep_sea", "N": 20}, "trials": 5, "steps_per_N": 500000,
                 "scale": "log", "discretization": None},
    "grid_world": {"env": {"kind": "grid_world"}, "trials": 100, "steps": 5000,
                   "scale": "linear", "discretization": None},
    "mountain_car": {"env": {"kind": "mountain_car_sparse"}, "trials": 50, "steps": 5000,
                     "scale": "linear", "discretization": 12},
    "cartpole": {"env": {"kind": "cartpole_swingup_sparse"}, "trials": 100, "steps": 5000,
                 "scale": "linear", "discretization": 20},
    "open_grid": {"env": {"kind": "open_grid"}, "trials": 100, "steps": 50000,
                  "scale": "linear", "discretization": None},
}

EnvLike = Union[dict, TabularEnv, TabularModel]


def _tabular_model(env: EnvLike, seed: int = 0, trial: int = 0) -> TabularModel:
    if isinstance(env, TabularModel):
        return env
    if isinstance(env, dict):
        env = make_env(env, rng=Xoshiro256.for_trial(seed, trial, STREAM_ENV))
    if not getattr(env, "tabular", False):
        raise EnvError(f"{type(env).__name__} is not tabular")
    return env.model()


def _explorer(cfg: dict, env_spec, seed: int, trial: int) -> ExplorationState:
    rng = Xoshiro256.for_trial(seed, trial, STREAM_EXPLORE)
    return make_explorer(cfg, env_spec if isinstance(env_spec, dict) else {}, rng)


# ---------------------------------------------------------------- first visits


@dataclass
class FirstVisitGrid:
    mean: np.ndarray          # mean first-visit step per cell (unseen = max_steps)
    trials: int
    max_steps: int
    scale: str = "linear"
    meta: dict = field(default_factory=dict)

    def scaled(self) -> np.ndarray:
        if self.scale == "log":
            return np.log(self.mean + 1.0)
        return self.mean.copy()

    def to_pgm_bytes(self) -> bytes:
        v = self.scaled()
        top = float(v.max())
        pix = np.zeros(v.shape, dtype=np.uint8) if top <= 0 else \
            np.rint(255.0 * v / top).astype(np.uint8)
        h, w = pix.shape
        return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()

    def metadata(self) -> dict:
        v = self.scaled()
        return {"trials": self.trials, "max_steps": self.max_steps, "scale": self.scale,
                "shape": list(self.mean.shape), "scaled_max": float(v.max()),
                "pixel": "round(255 * scaled / scaled_max)", **self.meta}

    def save(self, stem: Union[str, Path]) -> None:
        """Write ``stem.csv`` (scaled values), ``stem.pgm`` and ``stem.json``."""
        stem = Path(stem)
        write_csv_matrix(stem.with_suffix(".csv"), self.scaled())
        stem.with_suffix(".pgm").write_bytes(self.to_pgm_bytes())
        write_json(stem.with_suffix(".json"), self.metadata())


def _first_visit_trial(env_spec, cfg: dict, steps: int, discretization: Optional[int],
                       seed: int, trial: int) -> np.ndarray:
    explorer = _explorer(cfg, env_spec, seed, trial)
    g = cfg.get("greedy_action")
    if isinstance(env_spec, (dict, Env)) and not _is_tabular(env_spec):
        env = env_spec if isinstance(env_spec, Env) else \
            make_env(env_spec, rng=Xoshiro256.for_trial(seed, trial, STREAM_ENV))
        first, _ = kernels.explore_continuous(env, explorer, -1 if g is None else int(g),
                                              steps, discretization)
        return np.where(first < 0, steps, first).astype(np.float64)
    model = _tabular_model(env_spec, seed, trial)
    greedy = None if g is None else np.full(model.num_states, int(g), dtype=np.int64)
    first, _, _ = kernels.explore_tabular(model, explorer, greedy, steps)
    grid = np.full(model.grid_shape, float(steps))
    for s in range(model.num_states):
        r, c = model.grid_pos[s]
        if r >= 0 and first[s] >= 0:
            grid[r, c] = first[s]
    return grid


def _is_tabular(env_spec) -> bool:
    if isinstance(env_spec, TabularModel):
        return True
    if isinstance(env_spec, Env):
        return bool(getattr(env_spec, "tabular", False))
    kind = env_spec.get("kind")
    return kind in ("chain", "deep_sea", "grid_world", "open_grid")


def first_visit_map(env_spec: EnvLike, exploration_cfg: dict, trials: int, steps: int,
                    discretization: Optional[int] = None, scale: str = "linear", seed: int = 0,
                    workers: int = 1) -> FirstVisitGrid:
    """Mean first-visit step per state (tabular) or per projected cell (continuous).

    ``exploration_cfg`` is an explorer config (policy, epsilon, distribution)
    with an optional ``greedy_action``; without it the greedy branch acts on
    an all-zero table, so ties are broken uniformly.
    """
    if trials < 1 or steps < 1:
        raise ValueError("trials and steps must be positive")
    if scale not in ("linear", "log"):
        raise ValueError(f"unknown scale {scale!r}")
    tabular = _is_tabular(env_spec)
    if tabular and discretization is not None:
        raise ValueError("discretization applies to continuous environments only")
    if not tabular and (discretization is None or discretization < 1):
        raise ValueError("continuous environments need a positive discretization")
    grids = run_trials(_first_visit_trial,
                       [(env_spec, exploration_cfg, steps, discretization, seed, t) for t in range(trials)],
                       workers)
    total = np.zeros_like(grids[0])
    for g in grids:
        total += g
    return FirstVisitGrid(total / trials, trials, steps, scale,
                          {"seed": seed, "exploration": exploration_cfg})


def preset_first_visit(name: str, exploration_cfg: dict, seed: int = 0, workers: int = 1,
                       **overrides) -> FirstVisitGrid:
    p = dict(FIRST_VISIT_PRESETS[name])
    p.update(overrides)
    env = p["env"]
    steps = p.get("steps") or p["steps_per_N"] * int(env.get("N", 20))
    return first_visit_map(env, exploration_cfg, p["trials"], steps, p["discretization"],
                           p["scale"], seed, workers)


# ---------------------------------------------------------------- cover time


@dataclass
class CoverTimeReport:
    times: list            # per trial: steps until every pair was executed, or None
    budget: int
    median: Optional[float]

    @property
    def covered(self) -> bool:
        return self.median is not None

    @property
    def covered_trials(self) -> int:
        return sum(t is not None for t in self.times)

    def to_dict(self) -> dict:
        return {"budget": self.budget, "trials": len(self.times), "covered": self.covered,
                "covered_trials": self.covered_trials, "median": self.median,
                "times": self.times}


def _cover_trial(env_spec, cfg: dict, budget: int, greedy, seed: int, trial: int):
    model = _tabular_model(env_spec, seed, trial)
    explorer = _explorer(cfg, env_spec, seed, trial)
    _, first_pair, t = kernels.explore_tabular(model, explorer, greedy, budget, True)
    return t if bool((first_pair[model.pair_mask()] >= 0).all()) else None


def cover_time(env_spec: EnvLike, exploration_cfg: dict, trials: int = 101, budget: int = 10**7,
               seed: int = 0, greedy_policy=None, workers: int = 1) -> CoverTimeReport:
    """Steps until every executable state-action pair has been taken, per trial.

    The median over trials estimates the time by which coverage happens with
    probability 1/2; it is withheld when more than half the trials run out of
    budget.
    """
    if trials < 1 or budget < 1:
        raise ValueError("trials and budget must be positive")
    greedy = None if greedy_policy is None else np.asarray(greedy_policy, dtype=np.int64)
    times = run_trials(_cover_trial,
                       [(env_spec, exploration_cfg, budget, greedy, seed, t) for t in range(trials)],
                       workers)
    vals = np.array([math.inf if t is None else t for t in times], dtype=np.float64)
    med = float(np.median(vals))
    return CoverTimeReport(times, budget, med if math.isfinite(med) else None)


# ---------------------------------------------------------------- coverage


@dataclass
class CoverageResult:
    reachable: np.ndarray    # bool [S, A]
    valid: np.ndarray        # bool [S, A]; executable pairs (the product space)
    truncation: int

    @property
    def unreachable(self) -> list[tuple[int, int]]:
        s, a = np.nonzero(self.valid & ~self.reachable)
        return list(zip(s.tolist(), a.tolist()))

    @property
    def full(self) -> bool:
        return not self.unreachable

    def to_dict(self) -> dict:
        return {"truncation": self.truncation, "full_coverage": self.full,
                "reachable_pairs": int((self.valid & self.reachable).sum()),
                "valid_pairs": int(self.valid.sum()),
                "unreachable": [list(p) for p in self.unreachable]}


def coverage_check(env: EnvLike, options: Sequence[OptionSpec], epsilon: float,
                   greedy_policy=None, duration_truncation: Optional[int] = None) -> CoverageResult:
    """Which state-action pairs the option-augmented epsilon-greedy policy can execute.

    Breadth-first search over (state, option progress). Options that stop
    with a per-step probability treat both stopping and continuing as
    possible. ``greedy_policy=None`` stands for a fresh table, where every
    action is a possible greedy choice.
    """
    if isinstance(env, Env) and not getattr(env, "tabular", False):
        raise EnvError("coverage needs a tabular environment")
    if isinstance(env, dict) and not _is_tabular(env):
        raise EnvError("coverage needs a tabular environment")
    model = _tabular_model(env)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    for o in options:
        if not 0 <= o.action < model.num_actions:
            raise ValueError(f"option action {o.action} out of range")
    longest = max((o.length for o in options if o.length is not None), default=1)
    truncation = longest if duration_truncation is None else int(duration_truncation)
    if truncation < longest:
        raise ValueError(f"truncation {truncation} is shorter than the longest option ({longest})")
    greedy = None if greedy_policy is None else np.asarray(greedy_policy, dtype=np.int64)
    reach = kernels.coverage_bfs(model, list(options), float(epsilon), greedy, truncation)
    return CoverageResult(np.asarray(reach, dtype=bool), model.pair_mask(), truncation)


# ---------------------------------------------------------------- sequences


@dataclass
class SequenceProbabilityReport:
    epsilon: float
    num_actions: int
    k: int
    samples: int
    hits: int
    analytic: float

    @property
    def empirical(self) -> float:
        return self.hits / self.samples

    @property
    def std_error(self) -> float:
        p = self.analytic
        return math.sqrt(p * (1.0 - p) / self.samples)

    @property
    def z_score(self) -> float:
        se = self.std_error
        return 0.0 if se == 0 else (self.empirical - self.analytic) / se

    @property
    def relative_error(self) -> float:
        return abs(self.empirical - self.analytic) / self.analytic

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "num_actions": self.num_actions, "k": self.k,
                "samples": self.samples, "analytic": self.analytic, "empirical": self.empirical,
                "std_error": self.std_error, "z": self.z_score,
                "relative_error": self.relative_error}


def sequence_probability_check(epsilon: float, num_actions: int, k: int, samples: int,
                               seed: int = 0) -> SequenceProbabilityReport:
    """Frequency of one fixed length-k exploratory sequence under plain epsilon-greedy.

    The greedy action is 0 and the designated sequence cycles through the
    other actions, so each of its steps can only come from an exploratory
    draw; the analytic probability is (epsilon / |A|) ** k.
    """
    if num_actions < 2:
        raise ValueError("need at least two actions (one is reserved as the greedy action)")
    if k < 1 or samples < 1:
        raise ValueError("k and samples must be positive")
    analytic = (epsilon / num_actions) ** k
    if analytic * samples < 100:
        raise ValueError(f"{samples} samples give fewer than 100 expected hits for k={k}")
    target = np.array([1 + (i % (num_actions - 1)) for i in range(k)])
    explorer = ExplorationState.standard(epsilon, Xoshiro256(seed))
    q = np.zeros(num_actions)
    q[0] = 1.0
    acts, _ = kernels.select_actions(explorer, q, samples * k)
    hits = int((acts.reshape(samples, k) == target).all(axis=1).sum())
    return SequenceProbabilityReport(epsilon, num_actions, k, samples, hits, analytic)


def option_runs(explorer: ExplorationState, num_actions: int, steps: int,
                episode_length: int = 0) -> list[tuple[int, int, bool]]:
    """Drive the controller on an all-zero row and measure each exploratory option.

    Returns ``(action, steps_emitted, at_episode_end)`` per option, where
    ``steps_emitted`` counts the steps the option produced itself and
    ``at_episode_end`` marks options whose last step fell on an episode
    boundary (they may have been cut short).
    """
    acts, src = kernels.select_actions(explorer, np.zeros(num_actions), steps, episode_length)
    starts = np.flatnonzero(src == 1)
    runs = []
    for i, b in enumerate(starts):
        stop = starts[i + 1] if i + 1 < len(starts) else steps
        n = 1
        while b + n < stop and src[b + n] == 2:
            n += 1
        last = b + n - 1
        cut = last == steps - 1 or (episode_length > 0 and (last + 1) % episode_length == 0)
        runs.append((int(acts[b]), n, bool(cut)))
    return runs


# ---------------------------------------------------------------- writers


def write_csv_matrix(path: Union[str, Path], m: np.ndarray) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    header = ",".join(f"c{j}" for j in range(m.shape[1]))
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Union[str, Path], obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n",
                          encoding="utf-8", newline="\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
