"""Q-learning (tabular) and SARSA(lambda) (linear) training loops.

The per-episode functions here are the readable reference path. Whole
training runs go through ``ezgreedy.kernels``, which executes the same
loops in compiled code when the extension is available.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .approx import FourierBasis, LinearQ, TabularQ
from .distributions import DEFAULT_CAP, build_distribution, from_dict
from .envs import Env, make_env
from .exploration import ExplorationState
from .rng import STREAM_ENV, STREAM_EXPLORE, STREAM_INIT, Xoshiro256


class DivergenceError(FloatingPointError):
    pass


@dataclass
class QLearningConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    initial_value: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


@dataclass
class SarsaLambdaConfig:
    alpha: float = 0.005
    gamma: float = 0.99
    lam: float = 0.9
    order: int = 5
    weight_init_variance: float = 0.0
    lr_scaling: bool = True
    trace_kind: str = "accumulating"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.weight_init_variance < 0:
            raise ValueError("weight_init_variance must be >= 0")
        if self.trace_kind != "accumulating":
            raise ValueError("only accumulating traces are supported")


@dataclass
class EpisodeLog:
    episode: int
    ret: float
    discounted_return: float
    steps: int
    goal_reached: bool
    greedy_return: Optional[float] = None


def q_learning_update(q: TabularQ, x: int, a: int, r: float, x2: int, terminal: bool,
                      cfg: QLearningConfig) -> None:
    table = q.table
    target = r if terminal else r + cfg.gamma * table[x2].max()
    table[x, a] += cfg.alpha * (target - table[x, a])


def q_learning_episode(env: Env, q: TabularQ, explorer: ExplorationState,
                       cfg: QLearningConfig, episode: int = 0,
                       on_step: Optional[Callable] = None) -> EpisodeLog:
    x = env.reset()
    ret = disc = 0.0
    g = 1.0
    steps = 0
    goal = False
    while True:
        a = explorer.select(q.table[x])
        res = env.step(a)
        q_learning_update(q, x, a, res.reward, res.observation, res.done and not res.truncated, cfg)
        ret += res.reward
        disc += g * res.reward
        g *= cfg.gamma
        steps += 1
        goal = goal or res.reward > 0
        if on_step is not None:
            on_step(x, a, res)
        x = res.observation
        if res.done:
            break
    explorer.end_episode()
    return EpisodeLog(episode, ret, disc, steps, goal)


def greedy_rollout(env: Env, q) -> float:
    """Undiscounted return of the greedy policy (ties to the lowest index)."""
    x = env.reset()
    ret = 0.0
    while True:
        res = env.step(int(np.argmax(q.q_row(x))))
        ret += res.reward
        x = res.observation
        if res.done:
            return ret


def sarsa_lambda_episode(lq: LinearQ, traces: np.ndarray, env: Env, explorer: ExplorationState,
                         cfg: SarsaLambdaConfig, episode: int = 0,
                         on_step: Optional[Callable] = None) -> EpisodeLog:
    """One on-policy episode with accumulating traces.

    Per step: delta uses Q(x, a) under the current weights and Q(x', a') for
    the action a' that will actually be executed next; ``traces[a] += phi``,
    then the weight update, then the traces decay by gamma * lambda.
    """
    basis = lq.basis
    W = lq.weights
    step_sizes = cfg.alpha / basis.lr_scales if cfg.lr_scaling else np.full(basis.num_features, cfg.alpha)
    decay = cfg.gamma * cfg.lam
    traces[:] = 0.0

    obs = env.reset()
    phi = basis.features(obs)
    a = explorer.select(W @ phi)
    ret = disc = 0.0
    g = 1.0
    steps = 0
    goal = False
    while True:
        res = env.step(a)
        q_sa = W[a] @ phi
        a2 = None
        if res.done and not res.truncated:
            delta = res.reward - q_sa
        else:
            phi2 = basis.features(res.observation)
            q2 = W @ phi2
            a2 = explorer.select(q2)
            delta = res.reward + cfg.gamma * q2[a2] - q_sa
        if not math.isfinite(delta):
            raise DivergenceError(f"non-finite TD error at episode {episode}, step {steps}")
        traces[a] += phi
        W += (step_sizes * delta) * traces
        traces *= decay

        ret += res.reward
        disc += g * res.reward
        g *= cfg.gamma
        steps += 1
        goal = goal or res.reward > 0
        if on_step is not None:
            on_step(a, a2, delta)
        if res.done:
            break
        phi, a = phi2, a2
    explorer.end_episode()
    return EpisodeLog(episode, ret, disc, steps, goal)


def _rows_to_logs(rows: np.ndarray, with_greedy: bool) -> list[EpisodeLog]:
    logs = []
    for i, (ret, disc, steps, goal, greedy) in enumerate(rows):
        logs.append(EpisodeLog(i, float(ret), float(disc), int(steps), bool(goal),
                               float(greedy) if with_greedy and not math.isnan(greedy) else None))
    return logs


def resolve_epsilon(value, env_spec: dict) -> float:
    """Accept a number or the string ``"1/(N+1)"``."""
    if isinstance(value, str):
        if value.replace(" ", "") == "1/(N+1)":
            return 1.0 / (int(env_spec.get("N", 20)) + 1)
        raise ValueError(f"unsupported epsilon expression {value!r}")
    return float(value)


def make_explorer(exploration_cfg: dict, env_spec: dict, rng) -> ExplorationState:
    eps = resolve_epsilon(exploration_cfg.get("epsilon", 0.1), env_spec)
    policy = exploration_cfg.get("policy", "ez_greedy")
    if policy == "eps_greedy":
        return ExplorationState.standard(eps, rng)
    if policy != "ez_greedy":
        raise ValueError(f"unknown exploration policy {policy!r}")
    dist = from_dict(exploration_cfg.get("distribution", {"kind": "zeta", "mu": 2.0, "cap": DEFAULT_CAP}))
    return ExplorationState(eps, dist, rng, bool(exploration_cfg.get("pseudocode_literal", False)))


def run_training(env_spec: dict, learner_cfg: dict, exploration_cfg: dict, episodes: int,
                 seed: int, trial: int = 0, eval_every: int = 0,
                 stop_on_goal: bool = False) -> list[EpisodeLog]:
    """Train one trial; deterministic in (seed, trial)."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env_rng = Xoshiro256.for_trial(seed, trial, STREAM_ENV)
    rng = Xoshiro256.for_trial(seed, trial, STREAM_EXPLORE)
    env = make_env(env_spec, rng=env_rng)
    explorer = make_explorer(exploration_cfg, env_spec, rng)
    kind = learner_cfg.get("kind", "q_learning")
    params = {k: v for k, v in learner_cfg.items() if k != "kind"}
    if kind == "q_learning":
        if not env.tabular:
            raise ValueError("q_learning needs a tabular environment")
        cfg = QLearningConfig(**params)
        model = env.model()
        q = TabularQ(model.num_states, model.num_actions, cfg.initial_value)
        rows = kernels.q_learning(model, q.table, explorer, cfg.alpha, cfg.gamma, episodes,
                                  eval_every, stop_on_goal)
        return _rows_to_logs(rows, eval_every > 0)
    if kind == "sarsa_lambda":
        if env.tabular:
            raise ValueError("sarsa_lambda is wired for the continuous environments")
        if "lambda" in params:
            params["lam"] = params.pop("lambda")
        cfg = SarsaLambdaConfig(**params)
        basis = FourierBasis(cfg.order, env.low, env.high)
        lq = LinearQ(basis, env.num_actions)
        if cfg.weight_init_variance > 0:
            init = Xoshiro256.for_trial(seed, trial, STREAM_INIT).numpy()
            lq.weights[:] = init.normal(0.0, math.sqrt(cfg.weight_init_variance), lq.weights.shape)
        rows = kernels.sarsa_lambda(env, lq, explorer, cfg.alpha, cfg.gamma, cfg.lam,
                                    cfg.lr_scaling, episodes, stop_on_goal)
        return _rows_to_logs(rows, False)
    raise ValueError(f"unknown learner kind {kind!r}")
