"""Pure-Python kernels.

Same signatures and the same random-draw order as the compiled ``_core``
extension. The tabular kernels are bit-for-bit equivalent to it; the linear
kernels agree to rounding (feature evaluation and dot products are summed
in a different order).
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .envs import StepResult

NAN = float("nan")


class ModelEnv:
    """Step a ``TabularModel`` through the usual reset/step interface."""

    tabular = True

    def __init__(self, model):
        self.m = model
        self.num_actions = model.num_actions
        self.state = model.start
        self._t = 0

    def reset(self, rng=None):
        self.state = self.m.start
        self._t = 0
        return self.state

    def step(self, a):
        m = self.m
        s = self.state
        s2 = int(m.next_state[s, a])
        r = float(m.reward[s, a])
        term = bool(m.terminal[s, a])
        self.state = s2
        self._t += 1
        trunc = not term and self._t >= m.max_steps
        return StepResult(s2, r, term or trunc, trunc)


class _Table:
    def __init__(self, table):
        self.table = table

    def q_row(self, x):
        return self.table[x]


def q_learning(model, table, explorer, alpha, gamma, episodes, eval_every=0, stop_on_goal=False):
    from .learners import QLearningConfig, greedy_rollout, q_learning_episode, TabularQ

    cfg = QLearningConfig(alpha=alpha, gamma=gamma)
    env = ModelEnv(model)
    q = TabularQ.__new__(TabularQ)
    q.table = table
    rows = []
    for ep in range(episodes):
        log = q_learning_episode(env, q, explorer, cfg, ep)
        greedy = NAN
        if eval_every > 0 and (ep + 1) % eval_every == 0:
            greedy = greedy_rollout(env, _Table(table))
        rows.append((log.ret, log.discounted_return, log.steps, float(log.goal_reached), greedy))
        if stop_on_goal and log.goal_reached:
            break
    return np.array(rows, dtype=np.float64).reshape(-1, 5)


def select_actions(explorer, q_row, steps, episode_length=0):
    """Actions chosen against a fixed row, with their source (0 greedy, 1 option start, 2 option)."""
    q = [float(v) for v in q_row]
    acts = np.empty(steps, dtype=np.int64)
    src = np.empty(steps, dtype=np.uint8)
    ep_t = 0
    for t in range(steps):
        started, emitted = explorer.options_started, explorer.option_steps
        acts[t] = explorer.select(q)
        if explorer.options_started != started:
            src[t] = 1
        elif explorer.option_steps != emitted:
            src[t] = 2
        else:
            src[t] = 0
        ep_t += 1
        if episode_length > 0 and ep_t >= episode_length:
            explorer.end_episode()
            ep_t = 0
    explorer.end_episode()
    return acts, src


def explore_tabular(model, explorer, greedy, steps, stop_when_covered=False):
    """Run the explorer for ``steps`` primitive steps, resetting at episode ends.

    ``greedy`` is a per-state action array or ``None`` for a fresh all-zero
    table (ties broken uniformly). Returns first-visit step per state,
    first-execution step per state-action pair (-1 if never) and the number
    of steps taken.
    """
    S, A = model.num_states, model.num_actions
    first_state = np.full(S, -1, dtype=np.int64)
    first_pair = np.full((S, A), -1, dtype=np.int64)
    pairs_left = int(model.pair_mask().sum())
    zeros = [0.0] * A
    rows = None
    if greedy is not None:
        rows = []
        for s in range(S):
            row = [0.0] * A
            row[int(greedy[s])] = 1.0
            rows.append(row)
    nxt, term = model.next_state, model.terminal
    s = model.start
    first_state[s] = 0
    t = 0
    ep_t = 0
    while t < steps:
        if stop_when_covered and pairs_left == 0:
            break
        a = explorer.select(zeros if rows is None else rows[s])
        if first_pair[s, a] < 0:
            first_pair[s, a] = t
            pairs_left -= 1
        s2 = int(nxt[s, a])
        done = bool(term[s, a])
        t += 1
        ep_t += 1
        if first_state[s2] < 0:
            first_state[s2] = t
        if done or ep_t >= model.max_steps:
            explorer.end_episode()
            s2 = model.start
            ep_t = 0
        s = s2
    explorer.end_episode()
    return first_state, first_pair, t


def _project(env, obs, bins):
    if env.kind_code == 0:
        u = (obs[0] - env.low[0]) / (env.high[0] - env.low[0])
        v = (obs[1] - env.low[1]) / (env.high[1] - env.low[1])
    else:
        u = (obs[0] + 2.4) / 4.8
        v = (math.atan2(obs[2], obs[1]) + math.pi) / (2.0 * math.pi)
    i = min(max(int(u * bins), 0), bins - 1)
    j = min(max(int(v * bins), 0), bins - 1)
    return i, j


def explore_continuous(env, explorer, greedy_action, steps, bins):
    """First-visit steps over a bins x bins grid of the env's 2-d projection."""
    first = np.full((bins, bins), -1, dtype=np.int64)
    A = env.num_actions
    row = [0.0] * A
    if greedy_action >= 0:
        row[greedy_action] = 1.0
    obs = env.reset()
    first[_project(env, obs, bins)] = 0
    t = 0
    while t < steps:
        a = explorer.select(row)
        res = env.step(a)
        t += 1
        cell = _project(env, res.observation, bins)
        if first[cell] < 0:
            first[cell] = t
        if res.done:
            explorer.end_episode()
            env.reset()
    explorer.end_episode()
    return first, t


def sarsa_lambda(env, lq, explorer, alpha, gamma, lam, lr_scaling, episodes, stop_on_goal=False):
    from .learners import SarsaLambdaConfig, sarsa_lambda_episode

    cfg = SarsaLambdaConfig(alpha=alpha, gamma=gamma, lam=lam, order=lq.basis.order,
                            lr_scaling=lr_scaling)
    traces = np.zeros_like(lq.weights)
    rows = []
    for ep in range(episodes):
        log = sarsa_lambda_episode(lq, traces, env, explorer, cfg, ep)
        rows.append((log.ret, log.discounted_return, log.steps, float(log.goal_reached), NAN))
        if stop_on_goal and log.goal_reached:
            break
    return np.array(rows, dtype=np.float64).reshape(-1, 5)


def coverage_bfs(model, options, epsilon, greedy, truncation):
    """Reachable state-action pairs of the (state x option-progress) automaton.

    Modes: ``None`` is idle (the next step is a fresh epsilon decision),
    ``("n", a, r)`` is an exact-length option with ``r`` steps left, and
    ``("b", j)`` is an active per-step-probability option ``options[j]``.
    """
    S, A = model.num_states, model.num_actions
    nxt, term = model.next_state, model.terminal
    reach = np.zeros((S, A), dtype=bool)
    lengths = [set() for _ in range(A)]
    betas = []
    for j, o in enumerate(options):
        if o.length is not None:
            lengths[o.action].add(o.length)
        else:
            betas.append(j)

    seen = set()
    queue = deque()

    def push(node):
        if node not in seen:
            seen.add(node)
            queue.append(node)

    def execute(s, a, modes):
        reach[s, a] = True
        if term[s, a]:
            push((model.start, None))
        else:
            s2 = int(nxt[s, a])
            for m in modes:
                push((s2, m))

    push((model.start, None))
    while queue:
        s, mode = queue.popleft()
        if mode is None:
            if epsilon < 1.0:
                acts = range(A) if greedy is None else (int(greedy[s]),)
                for a in acts:
                    execute(s, a, (None,))
            if epsilon > 0.0:
                for a in range(A):
                    if lengths[a]:
                        execute(s, a, [None if n == 1 else ("n", a, n - 1) for n in sorted(lengths[a])])
                for j in betas:
                    o = options[j]
                    modes = []
                    if o.beta > 0.0:
                        modes.append(None)
                    if o.beta < 1.0:
                        modes.append(("b", j))
                    execute(s, o.action, modes)
        elif mode[0] == "n":
            _, a, r = mode
            execute(s, a, (None if r == 1 else ("n", a, r - 1),))
        else:
            o = options[mode[1]]
            modes = []
            if o.beta > 0.0:
                modes.append(None)
            if o.beta < 1.0:
                modes.append(mode)
            execute(s, o.action, modes)
    return reach
