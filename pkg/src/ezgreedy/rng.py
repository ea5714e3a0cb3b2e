"""Deterministic 64-bit random streams.

The generator is xoshiro256** seeded through splitmix64. Both the compiled
kernels and the pure-Python code paths advance the same four-word state, so
a stream handed to either backend produces the same draws in the same order.

Per-trial streams are derived by folding ``(seed, trial, purpose)`` through
the splitmix64 finalizer, which makes each trial's randomness independent of
how trials are scheduled across workers.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# purposes for derive_seed; keep stable, they are part of the determinism contract
STREAM_EXPLORE = 1
STREAM_ENV = 2
STREAM_INIT = 3


def fmix64(x: int) -> int:
    """splitmix64 output finalizer."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    h = fmix64(seed & MASK64)
    for k in keys:
        h = fmix64((h ^ (k & MASK64)) + GOLDEN_GAMMA)
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** with a numpy-visible state for the compiled kernels."""

    def __init__(self, seed: int = 0):
        s = []
        x = seed & MASK64
        for _ in range(4):
            x = (x + GOLDEN_GAMMA) & MASK64
            s.append(fmix64(x))
        self._s = s

    @classmethod
    def for_trial(cls, seed: int, trial: int, purpose: int = STREAM_EXPLORE) -> "Xoshiro256":
        return cls(derive_seed(seed, trial, purpose))

    @property
    def state(self) -> np.ndarray:
        return np.array(self._s, dtype=np.uint64)

    @state.setter
    def state(self, value) -> None:
        self._s = [int(v) & MASK64 for v in value]

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        k = int(self.random() * n)
        return k if k < n else n - 1

    def normal(self) -> float:
        """Standard normal via Box-Muller (one variate per two uniforms)."""
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def numpy(self) -> np.random.Generator:
        """A numpy Generator seeded from this stream, for bulk draws."""
        return np.random.default_rng(self.next_u64())
