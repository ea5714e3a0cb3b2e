"""epsilon-greedy and temporally-extended (ez) greedy action selection.

Random draws are consumed in a fixed order that the compiled kernels mirror:

* inside an active option: no draws;
* otherwise one uniform for the explore test (explore iff ``u < epsilon``);
* on explore: one uniform for the duration, then one for the action;
* on exploit: one uniform for tie-breaking, only when several actions share
  the maximum value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .distributions import DurationDistribution, build_distribution, duration_from_uniform


class EmptyActionValues(ValueError):
    pass


@dataclass
class RepeatOption:
    """Repeat ``action`` for ``total_steps`` primitive steps."""

    action: int
    total_steps: int
    remaining: int

    def __post_init__(self):
        if not 0 <= self.remaining <= self.total_steps:
            raise ValueError(f"remaining={self.remaining} outside [0, {self.total_steps}]")

    @property
    def elapsed(self) -> int:
        return self.total_steps - self.remaining


@dataclass(frozen=True)
class OptionSpec:
    """An action-repeat option for the coverage analysis.

    ``length`` gives termination after exactly that many steps; otherwise
    ``beta`` is the per-step termination probability.
    """

    action: int
    length: Optional[int] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if (self.length is None) == (self.beta is None):
            raise ValueError("exactly one of length or beta must be set")
        if self.length is not None and self.length < 1:
            raise ValueError("length must be >= 1")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @classmethod
    def after_exactly(cls, action: int, k: int) -> "OptionSpec":
        return cls(action, length=k)

    @classmethod
    def per_step_probability(cls, action: int, beta: float) -> "OptionSpec":
        if beta == 1.0:
            return cls(action, length=1)
        return cls(action, beta=beta)


def primitive_options(num_actions: int) -> list[OptionSpec]:
    return [OptionSpec.after_exactly(a, 1) for a in range(num_actions)]


def repeat_options(num_actions: int, dist: DurationDistribution,
                   truncation: Optional[int] = None) -> list[OptionSpec]:
    """All omega_{a,n} with n in the support of ``dist`` (up to ``truncation``)."""
    limit = dist.cap if truncation is None else truncation
    lengths = [int(n) for n in dist.support() if n <= limit]
    return [OptionSpec.after_exactly(a, n) for a in range(num_actions) for n in lengths]


def greedy_action(q_row: Sequence[float], rng) -> int:
    """argmax with uniform tie-breaking; draws only when there is a tie."""
    n = len(q_row)
    if n == 0:
        raise EmptyActionValues("q_row is empty")
    best = q_row[0]
    count = 1
    for i in range(1, n):
        v = q_row[i]
        if v > best:
            best = v
            count = 1
        elif v == best:
            count += 1
    if count == 1:
        for i in range(n):
            if q_row[i] == best:
                return i
    pick = rng.integers(count)
    for i in range(n):
        if q_row[i] == best:
            if pick == 0:
                return i
            pick -= 1
    raise AssertionError("unreachable")


def epsilon_greedy_select(epsilon: float, q_row: Sequence[float], rng) -> int:
    if len(q_row) == 0:
        raise EmptyActionValues("q_row is empty")
    if rng.random() < epsilon:
        return rng.integers(len(q_row))
    return greedy_action(q_row, rng)


class ExplorationState:
    """The ez-greedy controller.

    Holds the exploration rate, the duration law, the current repeat option
    (``None`` when the controller would draw afresh) and its random stream.
    ``pseudocode_literal`` switches to emitting the sampled action n+1 times.
    """

    def __init__(self, epsilon: float, duration_dist: DurationDistribution, rng,
                 pseudocode_literal: bool = False):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        self.epsilon = float(epsilon)
        self.duration_dist = duration_dist
        self.rng = rng
        self.pseudocode_literal = pseudocode_literal
        self.active_option: Optional[RepeatOption] = None
        # instrumentation
        self.options_started = 0
        self.option_steps = 0
        self.steps = 0

    @classmethod
    def standard(cls, epsilon: float, rng) -> "ExplorationState":
        """Plain epsilon-greedy expressed as ez-greedy with all mass on n = 1."""
        return cls(epsilon, build_distribution("fixed", 1, cap=1), rng)

    def select(self, q_row: Sequence[float]) -> int:
        if len(q_row) == 0:
            raise EmptyActionValues("q_row is empty")
        self.steps += 1
        opt = self.active_option
        if opt is not None:
            opt.remaining -= 1
            if opt.remaining == 0:
                self.active_option = None
            self.option_steps += 1
            return opt.action
        if self.rng.random() < self.epsilon:
            n = duration_from_uniform(self.duration_dist, self.rng.random())
            a = self.rng.integers(len(q_row))
            remaining = n if self.pseudocode_literal else n - 1
            if remaining > 0:
                self.active_option = RepeatOption(a, remaining + 1, remaining)
            self.options_started += 1
            self.option_steps += 1
            return a
        return greedy_action(q_row, self.rng)

    def end_episode(self) -> None:
        self.active_option = None


def ez_greedy_select(state: ExplorationState, q_row: Sequence[float], rng=None) -> int:
    if rng is not None:
        state.rng = rng
    return state.select(q_row)


def notify_episode_end(state: ExplorationState) -> None:
    state.end_episode()


def in_option_fraction(epsilon: float, mean_duration: float) -> float:
    """Long-run share of steps emitted by exploratory options (renewal argument)."""
    busy = epsilon * mean_duration
    return busy / (busy + 1.0 - epsilon)
