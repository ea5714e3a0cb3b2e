"""Compiled vs pure-Python kernel throughput.

    python benchmarks/bench_kernels.py [--quick]

Each kernel runs the same workload on both backends from the same random
stream and reports steps per second and the speed-up.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ezgreedy import _fallback
from ezgreedy.approx import FourierBasis, LinearQ
from ezgreedy.distributions import build_distribution
from ezgreedy.envs import CartPoleSwingup, DeepSea, GridWorld, MountainCar
from ezgreedy.exploration import ExplorationState
from ezgreedy.rng import Xoshiro256

try:
    from ezgreedy import _core
except ImportError:
    _core = None


def explorer(eps, seed=1):
    return ExplorationState(eps, build_distribution("zeta", 2.0), Xoshiro256(seed))


# Each workload builds its fixed inputs once and returns a runner that takes a
# backend module and reports the number of environment steps it executed.

def w_q_learning(scale):
    m = GridWorld().model()

    def run(mod):
        rows = mod.q_learning(m, np.zeros((m.num_states, 4)), explorer(0.1), 0.1, 0.99,
                              max(1, int(200 * scale)))
        return int(rows[:, 2].sum())
    return run


def w_explore_tabular(scale):
    m = DeepSea(20).model()
    return lambda mod: mod.explore_tabular(m, explorer(1.0), None, int(1_000_000 * scale))[2]


def w_explore_continuous(scale):
    return lambda mod: mod.explore_continuous(MountainCar(5000), explorer(1.0), -1,
                                              int(200_000 * scale), 12)[1]


def w_sarsa(env_factory, order, eps, alpha, lam):
    def make(scale):
        basis = FourierBasis(order, env_factory(1).low, env_factory(1).high)

        def run(mod):
            env = env_factory(scale)
            lq = LinearQ(basis, env.num_actions)
            rows = mod.sarsa_lambda(env, lq, explorer(eps), alpha, 0.99, lam, True, 1)
            return int(rows[:, 2].sum())
        return run
    return make


WORKLOADS = [
    ("q_learning gridworld", w_q_learning),
    ("explore_tabular deepsea", w_explore_tabular),
    ("explore_continuous mcar", w_explore_continuous),
    ("sarsa mcar (36 feats)", w_sarsa(lambda s: MountainCar(max(1, int(5000 * s))), 5, 0.05, 0.005, 0.9)),
    ("sarsa cartpole (32768)", w_sarsa(lambda s: CartPoleSwingup(max(2, int(100 * s)), rng=Xoshiro256(3)),
                                       7, 0.01, 0.0005, 0.7)),
]


def timed(run, mod):
    t0 = time.perf_counter()
    steps = run(mod)
    return steps, time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args(argv)
    scale = 0.1 if args.quick else 1.0
    if _core is None:
        print("compiled extension not built; only the fallback can run")
    print(f"{'kernel':26s} {'python steps/s':>15s} {'compiled steps/s':>17s} {'speed-up':>9s}")
    for name, make in WORKLOADS:
        run = make(scale)
        ps, pt = timed(run, _fallback)
        py_rate = ps / pt
        if _core is not None:
            cs, ct = timed(run, _core)
            c_rate = cs / ct
            print(f"{name:26s} {py_rate:15.3g} {c_rate:17.3g} {c_rate / py_rate:8.1f}x")
        else:
            print(f"{name:26s} {py_rate:15.3g} {'-':>17s} {'-':>9s}")


if __name__ == "__main__":
    main()
