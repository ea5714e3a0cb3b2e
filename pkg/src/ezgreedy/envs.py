"""Episodic environments: chain, DeepSea, GridWorld, open grid, MountainCar, CartPole.

Tabular environments are deterministic (the randomized DeepSea permutation is
fixed at construction), so each one compiles to a ``TabularModel`` of
transition tables that the rollout kernels step directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np


class EnvError(RuntimeError):
    pass


class StepResult(NamedTuple):
    observation: object
    reward: float
    done: bool
    truncated: bool = False  # done because of the time limit only


@dataclass
class TabularModel:
    """Flat deterministic transition tables for a tabular environment."""

    next_state: np.ndarray  # int64 [S, A]
    reward: np.ndarray      # float64 [S, A]
    terminal: np.ndarray    # uint8 [S, A]
    start: int
    max_steps: int
    state_terminal: np.ndarray  # bool [S]; states with no decisions
    grid_pos: np.ndarray    # int64 [S, 2]; (-1, -1) for unprojected states
    grid_shape: tuple

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def num_actions(self) -> int:
        return self.next_state.shape[1]

    def pair_mask(self) -> np.ndarray:
        """bool [S, A], True for state-action pairs that can be executed."""
        return np.repeat(~self.state_terminal[:, None], self.num_actions, axis=1)


class Env:
    num_actions: int
    max_episode_steps: int

    def __init__(self, max_episode_steps: int):
        if max_episode_steps < 1:
            raise EnvError("max_episode_steps must be positive")
        self.max_episode_steps = int(max_episode_steps)
        self._t = 0
        self._done = True

    def _check_step(self, action: int) -> None:
        if self._done:
            raise EnvError("step() called on a finished episode; call reset()")
        if not 0 <= action < self.num_actions:
            raise EnvError(f"action {action} out of range [0, {self.num_actions})")

    def _finish(self, obs, reward: float, terminal: bool) -> StepResult:
        self._t += 1
        truncated = not terminal and self._t >= self.max_episode_steps
        self._done = terminal or truncated
        return StepResult(obs, reward, self._done, truncated)


class TabularEnv(Env):
    """Deterministic finite MDP defined by ``_dynamics``."""

    tabular = True

    def __init__(self, max_episode_steps: int):
        super().__init__(max_episode_steps)
        self.state = self.start_state

    # subclasses define: num_states, num_actions, start_state, _dynamics, position
    def _dynamics(self, s: int, a: int) -> tuple[int, float, bool]:
        raise NotImplementedError

    def is_terminal_state(self, s: int) -> bool:
        return False

    def position(self, s: int) -> Optional[tuple[int, int]]:
        return None

    grid_shape: tuple = (1, 1)

    def reset(self, rng=None) -> int:
        self.state = self.start_state
        self._t = 0
        self._done = False
        return self.state

    def step(self, action: int) -> StepResult:
        self._check_step(action)
        s2, r, term = self._dynamics(self.state, action)
        self.state = s2
        return self._finish(s2, r, term)

    def enumerate_states(self) -> list[int]:
        return list(range(self.num_states))

    def transition_model(self, state: int, action: int) -> list[tuple[int, float, float, bool]]:
        if not 0 <= state < self.num_states or not 0 <= action < self.num_actions:
            raise EnvError(f"({state}, {action}) out of range")
        s2, r, term = self._dynamics(state, action)
        return [(s2, 1.0, r, term)]

    def model(self) -> TabularModel:
        S, A = self.num_states, self.num_actions
        nxt = np.zeros((S, A), dtype=np.int64)
        rew = np.zeros((S, A), dtype=np.float64)
        term = np.zeros((S, A), dtype=np.uint8)
        state_terminal = np.zeros(S, dtype=bool)
        pos = np.full((S, 2), -1, dtype=np.int64)
        for s in range(S):
            state_terminal[s] = self.is_terminal_state(s)
            p = self.position(s)
            if p is not None:
                pos[s] = p
            for a in range(A):
                if state_terminal[s]:
                    nxt[s, a], rew[s, a], term[s, a] = s, 0.0, 1
                else:
                    s2, r, t = self._dynamics(s, a)
                    nxt[s, a], rew[s, a], term[s, a] = s2, r, t
        return TabularModel(nxt, rew, term, self.start_state, self.max_episode_steps,
                            state_terminal, pos, tuple(self.grid_shape))

    def dump_transitions(self) -> str:
        """Tab-separated model dump: state, action, next_state, prob, reward, done."""
        lines = ["state\taction\tnext_state\tprob\treward\tdone"]
        for s in self.enumerate_states():
            if self.is_terminal_state(s):
                continue
            for a in range(self.num_actions):
                for s2, p, r, d in self.transition_model(s, a):
                    lines.append(f"{s}\t{a}\t{s2}\t{p!r}\t{r!r}\t{int(d)}")
        return "\n".join(lines) + "\n"


def chain_deposits(num_blocks: int) -> np.ndarray:
    """Block k holds k zero cells followed by one cell paying k."""
    out = []
    for k in range(1, num_blocks + 1):
        out.extend([0.0] * k)
        out.append(float(k))
    return np.array(out)


class Chain(TabularEnv):
    """Action 0 moves right, action 1 cashes in the current cell and ends the episode.

    Action 0 on the last cell behaves like action 1.
    """

    num_actions = 2
    start_state = 0

    def __init__(self, num_blocks: int = 10, max_episode_steps: Optional[int] = None):
        if num_blocks < 1:
            raise EnvError("num_blocks must be positive")
        self.num_blocks = num_blocks
        self.deposits = chain_deposits(num_blocks)
        self.num_states = len(self.deposits)
        self.grid_shape = (1, self.num_states)
        super().__init__(max_episode_steps or self.num_states)

    def _dynamics(self, s, a):
        last = self.num_states - 1
        if a == 1 or s == last:
            return s, float(self.deposits[s]), True
        return s + 1, 0.0, False

    def position(self, s):
        return (0, s)


class DeepSea(TabularEnv):
    """Lower-triangular N x N grid; each step moves one row down.

    Action effects are {down, down-right}; the randomized variant swaps them
    in a random subset of cells, fixed for the lifetime of the instance. The
    goal reward is paid for moving right from the bottom-right cell, so the
    only rewarding trajectory is N consecutive right moves.

    ``step_cost`` selects where the -0.01/N cost applies: ``"every"`` step or
    only on ``"right"`` moves.
    """

    num_actions = 2

    def __init__(self, N: int = 20, randomized: bool = False, rng=None,
                 step_cost: str = "right", max_episode_steps: Optional[int] = None):
        if N < 1:
            raise EnvError("N must be positive")
        if step_cost not in ("every", "right"):
            raise EnvError(f"unknown step_cost {step_cost!r}")
        self.N = N
        self.randomized = randomized
        self.step_cost = step_cost
        self.num_states = N * (N + 1) // 2 + 1
        self.terminal_index = self.num_states - 1
        self.start_state = 0
        self.grid_shape = (N, N)
        # swap[s] = 1 means action 0 moves right in cell s
        cells = self.num_states - 1
        if randomized:
            if rng is None:
                raise EnvError("randomized DeepSea needs an rng")
            self.swap = np.array([rng.integers(2) for _ in range(cells)], dtype=np.int64)
        else:
            self.swap = np.zeros(cells, dtype=np.int64)
        super().__init__(max_episode_steps or N)

    @staticmethod
    def index(row: int, col: int) -> int:
        return row * (row + 1) // 2 + col

    def cell(self, s: int) -> tuple[int, int]:
        row = int((math.isqrt(8 * s + 1) - 1) // 2)
        return row, s - row * (row + 1) // 2

    def moves_right(self, s: int, a: int) -> bool:
        return bool(a ^ self.swap[s])

    def goal_action(self, s: int) -> int:
        return int(1 ^ self.swap[s])

    def is_terminal_state(self, s):
        return s == self.terminal_index

    def position(self, s):
        return None if s == self.terminal_index else self.cell(s)

    def _dynamics(self, s, a):
        row, col = self.cell(s)
        right = self.moves_right(s, a)
        r = 0.0
        if right or self.step_cost == "every":
            r -= 0.01 / self.N
        if right and row == self.N - 1 and col == self.N - 1:
            r += 1.0
        if right:
            col = min(col + 1, row + 1)
        row += 1
        if row == self.N:
            return self.terminal_index, r, True
        return self.index(row, col), r, False


MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


class GridWorld(TabularEnv):
    """Open room; start one row below the top wall at the centre column.

    With ``terminate_on_wall`` a move into a wall ends the episode (the open
    grid used for first-visit plots); otherwise it is a no-op. ``goal`` is
    terminal and pays 1.0; ``None`` means no goal.
    """

    num_actions = 4

    def __init__(self, width: int = 23, height: int = 23, goal="default",
                 terminate_on_wall: bool = False, max_episode_steps: int = 1000,
                 start: Optional[tuple[int, int]] = None):
        if width < 1 or height < 2:
            raise EnvError("grid too small")
        self.width, self.height = width, height
        self.num_states = width * height
        self.grid_shape = (height, width)
        r0, c0 = start if start is not None else (1, width // 2)
        self.start_cell = (r0, c0)
        self.start_state = r0 * width + c0
        if goal == "default":
            goal = (height - 2, 1)
        self.goal = tuple(goal) if goal is not None else None
        self.goal_state = None if goal is None else goal[0] * width + goal[1]
        self.terminate_on_wall = terminate_on_wall
        super().__init__(max_episode_steps)

    def is_terminal_state(self, s):
        return s == self.goal_state

    def position(self, s):
        return divmod(s, self.width)

    def _dynamics(self, s, a):
        row, col = divmod(s, self.width)
        dr, dc = MOVES[a]
        r2, c2 = row + dr, col + dc
        if not (0 <= r2 < self.height and 0 <= c2 < self.width):
            return s, 0.0, self.terminate_on_wall
        s2 = r2 * self.width + c2
        if s2 == self.goal_state:
            return s2, 1.0, True
        return s2, 0.0, False


def open_grid(width: int = 23, height: int = 23, terminate_on_wall: bool = True,
              max_episode_steps: int = 5000) -> GridWorld:
    return GridWorld(width, height, goal=None, terminate_on_wall=terminate_on_wall,
                     max_episode_steps=max_episode_steps)


class ContinuousEnv(Env):
    tabular = False

    def enumerate_states(self):
        raise EnvError(f"{type(self).__name__} has a continuous state space")

    def transition_model(self, state, action):
        raise EnvError(f"{type(self).__name__} has no tabular model")


class MountainCar(ContinuousEnv):
    """Sparse MountainCar: reward 1.0 on reaching position 0.5, else 0."""

    num_actions = 3
    low = np.array([-1.2, -0.07])
    high = np.array([0.6, 0.07])
    kind_code = 0

    def __init__(self, max_episode_steps: int = 5000, start=(-0.5, 0.0)):
        super().__init__(max_episode_steps)
        self.start = (float(start[0]), float(start[1]))
        self.position, self.velocity = self.start

    def reset(self, rng=None) -> np.ndarray:
        self.position, self.velocity = self.start
        self._t = 0
        self._done = False
        return self.observation()

    def observation(self) -> np.ndarray:
        return np.array([self.position, self.velocity])

    def step(self, action: int) -> StepResult:
        self._check_step(action)
        p, v = mountain_car_dynamics(self.position, self.velocity, action)
        self.position, self.velocity = p, v
        goal = p >= 0.5
        return self._finish(self.observation(), 1.0 if goal else 0.0, goal)


def mountain_car_dynamics(p: float, v: float, action: int) -> tuple[float, float]:
    v = v + 0.001 * (action - 1) - 0.0025 * math.cos(3.0 * p)
    v = min(max(v, -0.07), 0.07)
    p = p + v
    p = min(max(p, -1.2), 0.6)
    if p == -1.2 and v < 0.0:
        v = 0.0
    return p, v


@dataclass(frozen=True)
class CartPoleParams:
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    gravity: float = 9.8
    force: float = 10.0
    dt: float = 0.01
    substeps: int = 2
    rail: float = 2.4
    jitter: float = 0.01

    def as_array(self) -> np.ndarray:
        return np.array([self.cart_mass, self.pole_mass, self.half_length, self.gravity,
                         self.force, self.dt, float(self.substeps), self.rail, self.jitter])


def cartpole_dynamics(state: list, force: float, prm: CartPoleParams) -> None:
    """Advance ``[x, theta, x_dot, theta_dot]`` in place by one control step."""
    total = prm.cart_mass + prm.pole_mass
    pml = prm.pole_mass * prm.half_length
    x, th, xd, thd = state
    for _ in range(prm.substeps):
        c, s = math.cos(th), math.sin(th)
        tmp = (force + pml * thd * thd * s) / total
        thacc = (prm.gravity * s - c * tmp) / (
            prm.half_length * (4.0 / 3.0 - prm.pole_mass * c * c / total))
        xacc = tmp - pml * thacc * c / total
        x = x + prm.dt * xd
        xd = xd + prm.dt * xacc
        th = th + prm.dt * thd
        thd = thd + prm.dt * thacc
        if x > prm.rail:
            x, xd = prm.rail, 0.0
        elif x < -prm.rail:
            x, xd = -prm.rail, 0.0
    state[0], state[1], state[2], state[3] = x, th, xd, thd


class CartPoleSwingup(ContinuousEnv):
    """Sparse swing-up: reward 1.0 when cos(theta) > 0.995 and |x| < 0.25.

    theta = 0 is upright; episodes start hanging down and only end at the
    time limit. Observation: (x, cos theta, sin theta, x_dot, theta_dot).
    """

    num_actions = 3
    low = np.array([-2.4, -1.0, -1.0, -10.0, -10.0])
    high = np.array([2.4, 1.0, 1.0, 10.0, 10.0])
    kind_code = 1

    def __init__(self, max_episode_steps: int = 1000, rng=None, jitter: bool = True,
                 params: CartPoleParams = CartPoleParams()):
        super().__init__(max_episode_steps)
        self.params = params
        self.rng = rng
        self.jitter = jitter
        self.state = [0.0, math.pi, 0.0, 0.0]

    def reset(self, rng=None) -> np.ndarray:
        rng = rng or self.rng
        self.state = [0.0, math.pi, 0.0, 0.0]
        if self.jitter:
            if rng is None:
                raise EnvError("jittered reset needs an rng")
            sd = self.params.jitter
            for i in range(4):
                self.state[i] += sd * rng.normal()
        self._t = 0
        self._done = False
        return self.observation()

    def observation(self) -> np.ndarray:
        x, th, xd, thd = self.state
        return np.array([x, math.cos(th), math.sin(th), xd, thd])

    def step(self, action: int) -> StepResult:
        self._check_step(action)
        cartpole_dynamics(self.state, (action - 1) * self.params.force, self.params)
        x, th = self.state[0], self.state[1]
        r = 1.0 if (math.cos(th) > 0.995 and abs(x) < 0.25) else 0.0
        return self._finish(self.observation(), r, False)


# env kinds accepted in configs
ENV_KINDS = ("chain", "deep_sea", "grid_world", "open_grid", "mountain_car_sparse",
             "cartpole_swingup_sparse")
_ALIASES = {"mountain_car": "mountain_car_sparse", "cartpole": "cartpole_swingup_sparse"}


def make_env(spec: dict, rng=None) -> Env:
    """Build an environment from a config mapping (``{"kind": ..., ...}``)."""
    spec = dict(spec)
    kind = spec.pop("kind")
    kind = _ALIASES.get(kind, kind)
    mx = spec.pop("max_episode_steps", None)
    if kind == "chain":
        return Chain(int(spec.get("num_blocks", 10)), max_episode_steps=mx)
    if kind == "deep_sea":
        return DeepSea(int(spec.get("N", 20)), bool(spec.get("randomized", False)), rng=rng,
                       step_cost=spec.get("step_cost", "right"), max_episode_steps=mx)
    if kind == "grid_world":
        goal = spec.get("goal", "default")
        return GridWorld(int(spec.get("width", 23)), int(spec.get("height", 23)),
                         goal=tuple(goal) if isinstance(goal, list) else goal,
                         max_episode_steps=mx or 1000)
    if kind == "open_grid":
        return open_grid(int(spec.get("width", 23)), int(spec.get("height", 23)),
                         bool(spec.get("terminate_on_wall", True)), mx or 5000)
    if kind == "mountain_car_sparse":
        return MountainCar(mx or 5000)
    if kind == "cartpole_swingup_sparse":
        return CartPoleSwingup(mx or 1000, rng=rng, jitter=bool(spec.get("jitter", True)))
    raise EnvError(f"unknown environment kind {kind!r}")
