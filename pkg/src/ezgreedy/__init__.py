"""Temporally-extended epsilon-greedy exploration with heavy-tailed action repeats."""

from .distributions import DurationDistribution, build_distribution, from_dict, sample_duration
from .exploration import (ExplorationState, OptionSpec, RepeatOption, epsilon_greedy_select,
                          ez_greedy_select, primitive_options, repeat_options)
from .envs import (CartPoleSwingup, Chain, DeepSea, GridWorld, MountainCar, StepResult, make_env,
                   open_grid)
from .approx import FourierBasis, LinearQ, TabularQ
from .learners import (DivergenceError, QLearningConfig, SarsaLambdaConfig, q_learning_episode,
                       run_training, sarsa_lambda_episode)
from .kernels import BACKEND
from .rng import Xoshiro256

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CartPoleSwingup", "Chain", "DeepSea", "DivergenceError", "DurationDistribution",
    "ExplorationState", "FourierBasis", "GridWorld", "LinearQ", "MountainCar", "OptionSpec",
    "QLearningConfig", "RepeatOption", "SarsaLambdaConfig", "StepResult", "TabularQ", "Xoshiro256",
    "build_distribution", "epsilon_greedy_select", "ez_greedy_select", "from_dict", "make_env",
    "open_grid", "primitive_options", "q_learning_episode", "repeat_options", "run_training",
    "sample_duration", "sarsa_lambda_episode",
]
