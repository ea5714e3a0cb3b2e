"""Action-value representations: a table, and linear over a Fourier basis."""

from __future__ import annotations

import itertools

import numpy as np


class TabularQ:
    def __init__(self, num_states: int, num_actions: int, initial_value: float = 0.0):
        self.initial_value = float(initial_value)
        self.table = np.full((num_states, num_actions), self.initial_value, dtype=np.float64)

    @property
    def num_actions(self) -> int:
        return self.table.shape[1]

    def q_eval(self, state: int, action: int) -> float:
        return float(self.table[state, action])

    def q_row(self, state: int) -> np.ndarray:
        return self.table[state]


class FourierBasis:
    """Full coupled Fourier basis: phi_c(x) = cos(pi * c . xbar), c in {0..order}^dims.

    ``xbar`` is the observation clipped to ``[low, high]`` and rescaled to
    the unit cube. Coefficient vectors are in lexicographic order, so
    ``phi[0]`` is the constant feature.
    """

    def __init__(self, order: int, low, high):
        low = np.asarray(low, dtype=np.float64)
        high = np.asarray(high, dtype=np.float64)
        if order < 0:
            raise ValueError("order must be nonnegative")
        if low.shape != high.shape or low.ndim != 1 or np.any(high <= low):
            raise ValueError("bounds must be 1-d with high > low")
        self.order = int(order)
        self.dims = low.size
        self.low, self.high = low, high
        self.coeffs = np.array(list(itertools.product(range(order + 1), repeat=self.dims)),
                               dtype=np.float64).reshape(-1, self.dims)
        norms = np.sqrt((self.coeffs ** 2).sum(axis=1))
        norms[0] = 1.0
        self.lr_scales = norms

    @property
    def num_features(self) -> int:
        return self.coeffs.shape[0]

    def normalize(self, observation) -> np.ndarray:
        x = np.asarray(observation, dtype=np.float64)
        if x.shape != (self.dims,):
            raise ValueError(f"expected observation of length {self.dims}, got shape {x.shape}")
        x = np.clip(x, self.low, self.high)
        return (x - self.low) / (self.high - self.low)

    def features(self, observation) -> np.ndarray:
        return np.cos(np.pi * (self.coeffs @ self.normalize(observation)))


def fourier_features(basis: FourierBasis, observation) -> np.ndarray:
    return basis.features(observation)


class LinearQ:
    def __init__(self, basis: FourierBasis, num_actions: int, weights=None):
        self.basis = basis
        if weights is None:
            weights = np.zeros((num_actions, basis.num_features))
        weights = np.array(weights, dtype=np.float64)
        if weights.shape != (num_actions, basis.num_features):
            raise ValueError(f"weights shape {weights.shape} != {(num_actions, basis.num_features)}")
        self.weights = weights

    @property
    def num_actions(self) -> int:
        return self.weights.shape[0]

    def q_eval(self, observation, action: int) -> float:
        if not 0 <= action < self.num_actions:
            raise IndexError(f"action {action} out of range")
        return float(self.weights[action] @ self.basis.features(observation))

    def q_row(self, observation) -> np.ndarray:
        return self.weights @ self.basis.features(observation)

    def gradient(self, observation, action: int) -> np.ndarray:
        """d q_eval / d weights[action]; the other rows have zero gradient."""
        return self.basis.features(observation)

    def save_csv(self, path) -> None:
        np.savetxt(path, self.weights, delimiter=",", fmt="%.17g")

    @classmethod
    def load_csv(cls, path, basis: FourierBasis) -> "LinearQ":
        w = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(basis, w.shape[0], w)


def q_eval(repr_, x, action: int) -> float:
    return repr_.q_eval(x, action)


def q_row(repr_, x) -> np.ndarray:
    return repr_.q_row(x)
