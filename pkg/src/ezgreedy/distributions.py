"""Truncated discrete distributions over action-repeat durations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CAP = 10000
SHORT_CAP = 100

KINDS = ("zeta", "uniform", "geometric", "fixed")


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class DurationDistribution:
    """A law over repeat lengths ``n in {1..cap}``.

    ``pmf_table[i]`` is the probability of ``n = i + 1``. Sampling is an
    inverse-CDF lookup over ``cdf_table``.
    """

    kind: str
    param: float
    cap: int
    pmf_table: np.ndarray = field(repr=False)
    cdf_table: np.ndarray = field(repr=False)

    def pmf(self, n: int) -> float:
        if 1 <= n <= self.cap:
            return float(self.pmf_table[n - 1])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(np.arange(1, self.cap + 1), self.pmf_table))

    def survival(self, n: int) -> float:
        """P(duration >= n)."""
        if n <= 1:
            return 1.0
        if n > self.cap:
            return 0.0
        return float(math.fsum(self.pmf_table[n - 1:]))

    @property
    def max_duration(self) -> int:
        return int(np.flatnonzero(self.pmf_table)[-1]) + 1

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pmf_table) + 1

    def to_dict(self) -> dict:
        key = {"zeta": "mu", "uniform": "N", "geometric": "lambda", "fixed": "n"}[self.kind]
        value = int(self.param) if self.kind in ("uniform", "fixed") else self.param
        return {"kind": self.kind, key: value, "cap": self.cap}


def _weights(kind: str, param: float, cap: int) -> np.ndarray:
    n = np.arange(1, cap + 1, dtype=np.float64)
    if kind == "zeta":
        return n ** (-param)
    if kind == "uniform":
        return (n <= param).astype(np.float64)
    if kind == "geometric":
        # log-space keeps long tails from underflowing to an all-zero table
        return np.exp((n - 1.0) * math.log(param))
    if kind == "fixed":
        return (n == param).astype(np.float64)
    raise DistributionError(f"unknown duration distribution {kind!r}")


def build_distribution(kind: str, param: float, cap: int = DEFAULT_CAP,
                       allow_heavy: bool = False) -> DurationDistribution:
    """Build a normalized, truncated duration law.

    ``param`` is mu for zeta, N for uniform, lambda for geometric and the
    repeat length for fixed. Zeta exponents in (0, 1] only make sense under
    truncation and must be requested with ``allow_heavy=True``.
    """
    if not isinstance(cap, (int, np.integer)) or cap < 1:
        raise DistributionError(f"cap must be a positive integer, got {cap!r}")
    if kind == "zeta":
        if not param > 0:
            raise DistributionError(f"zeta exponent must be > 0, got {param}")
        if param <= 1 and not allow_heavy:
            raise DistributionError(
                f"zeta exponent {param} <= 1 diverges untruncated; pass allow_heavy=True")
    elif kind == "uniform":
        if int(param) != param or param < 1:
            raise DistributionError(f"uniform N must be a positive integer, got {param}")
    elif kind == "geometric":
        if not 0 < param < 1:
            raise DistributionError(f"geometric lambda must lie in (0, 1), got {param}")
    elif kind == "fixed":
        if int(param) != param or param < 1:
            raise DistributionError(f"fixed duration must be a positive integer, got {param}")
        if param > cap:
            raise DistributionError(f"fixed duration {param} exceeds cap {cap}")
    else:
        raise DistributionError(f"unknown duration distribution {kind!r}")

    w = _weights(kind, float(param), int(cap))
    total = math.fsum(w)
    pmf = w / total
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    pmf.setflags(write=False)
    cdf.setflags(write=False)
    return DurationDistribution(kind, float(param), int(cap), pmf, cdf)


def from_dict(spec: dict) -> DurationDistribution:
    """Build from a config mapping such as ``{"kind": "zeta", "mu": 2.0}``."""
    kind = spec.get("kind", "zeta")
    key = {"zeta": "mu", "uniform": "N", "geometric": "lambda", "fixed": "n"}.get(kind)
    if key is None:
        raise DistributionError(f"unknown duration distribution {kind!r}")
    param = spec.get(key, 2.0 if kind == "zeta" else None)
    if param is None:
        raise DistributionError(f"{kind} distribution needs {key!r}")
    return build_distribution(kind, param, int(spec.get("cap", DEFAULT_CAP)),
                              allow_heavy=bool(spec.get("allow_heavy", False)))


def duration_from_uniform(dist: DurationDistribution, u: float) -> int:
    """Smallest n with cdf(n) > u; u is uniform on [0, 1)."""
    i = int(np.searchsorted(dist.cdf_table, u, side="right"))
    return min(i, dist.cap - 1) + 1


def sample_duration(dist: DurationDistribution, rng) -> int:
    return duration_from_uniform(dist, rng.random())
