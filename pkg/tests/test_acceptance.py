"""End-to-end acceptance criteria, each at its stated tolerance and time limit.

Every test records one PASS/FAIL line (shown in the terminal summary under
"acceptance criteria") and then asserts the verdict. Run only these with
``pytest -m acceptance -s``.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from scipy import stats

from ezgreedy import analysis, config, kernels
from ezgreedy.approx import FourierBasis, LinearQ
from ezgreedy.cli import PURE_EXPLORATION, main as cli_main
from ezgreedy.distributions import KINDS, build_distribution, sample_duration
from ezgreedy.envs import CartPoleSwingup, Chain, DeepSea, GridWorld, MountainCar
from ezgreedy.exploration import (ExplorationState, OptionSpec, epsilon_greedy_select,
                                  primitive_options, repeat_options)
from ezgreedy.learners import SarsaLambdaConfig, sarsa_lambda_episode
from ezgreedy.rng import Xoshiro256
from ezgreedy.runner import run_experiment, run_sweep

from acceptance_log import record
from oracles import (deep_sea_success_probability, geometric_median, one_step_sarsa,
                     truncated_pmf, value_iteration)

pytestmark = pytest.mark.acceptance

WORKERS = os.cpu_count() or 1
ZETA = {"kind": "zeta", "mu": 2.0, "cap": 10000}
EPS_POLICY = {"policy": "eps_greedy"}
EZ_POLICY = {"policy": "ez_greedy", "distribution": dict(ZETA)}


def chi_square_vs_pmf(samples: np.ndarray, pmf: np.ndarray, min_expected: float = 5.0) -> float:
    """p-value of a goodness-of-fit test, pooling the tail so every bin expects >= min_expected."""
    n = samples.size
    k = 1
    while k < pmf.size and pmf[k] * n >= min_expected and pmf[k:].sum() * n >= 2 * min_expected:
        k += 1
    obs = np.bincount(np.minimum(samples, k + 1) - 1, minlength=k + 1)[: k + 1]
    exp = np.append(pmf[:k], pmf[k:].sum()) * n
    return float(stats.chisquare(obs, exp).pvalue)


def episodes_to_first_goal(env_spec: dict, exploration: dict, trials: int, cap: int) -> np.ndarray:
    cfg = config.resolve_run(None, {
        "env": env_spec, "learner": {"kind": "q_learning", "alpha": 1.0, "gamma": 0.99},
        "exploration": exploration, "episodes": cap, "trials": trials, "stop_on_goal": True})
    firsts = run_experiment(cfg, WORKERS).first_goal_episodes()
    return np.array([math.inf if f is None else f for f in firsts], dtype=float)


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_01_distributions():
    limit = 10.0
    with Clock() as c:
        d = build_distribution("zeta", 2.0, 10000)
        r = Xoshiro256(2024)
        draws = np.fromiter((sample_duration(d, r) for _ in range(10**6)), dtype=np.int64, count=10**6)
        p = chi_square_vs_pmf(draws, np.asarray(truncated_pmf("zeta", 2.0, 10000)))
        grid = {"zeta": [1.01, 1.5, 2.0, 3.0, 6.0], "uniform": [1, 2, 10, 50, 10000],
                "geometric": [0.5, 0.9, 0.99, 0.999], "fixed": [1, 7, 100]}
        worst = 0.0
        for kind in KINDS:
            for param in grid[kind]:
                for cap in (100, 10000):
                    if kind in ("uniform", "fixed") and param > cap:
                        continue
                    dist = build_distribution(kind, param, cap)
                    worst = max(worst, abs(math.fsum(dist.pmf_table) - 1.0))
    ok = p > 0.001 and worst <= 1e-12 and c.elapsed < limit
    record(1, "zeta sampler and pmf normalisation", ok, c.elapsed, limit,
           f"chi-square p={p:.3g} (need >0.001); max |sum pmf - 1|={worst:.1e} (need <=1e-12)")
    assert ok


def test_criterion_02_state_machine():
    limit = 30.0
    with Clock() as c:
        bad = 0
        checked = 0
        for k in (1, 2, 3, 7):
            ex = ExplorationState(1.0, build_distribution("fixed", k, k), Xoshiro256(k))
            runs = analysis.option_runs(ex, 4, 10**5, episode_length=100)
            full = [n for _, n, cut in runs if not cut]
            checked += len(full)
            bad += sum(n != k for n in full) + sum(n > k for _, n, _ in runs)
        d = build_distribution("zeta", 2.0, 10000)
        ex = ExplorationState(1.0, d, Xoshiro256(77))
        runs = analysis.option_runs(ex, 4, 10**6)
        lengths = np.array([n for _, n, cut in runs if not cut])
        p = chi_square_vs_pmf(lengths, d.pmf_table)
    ok = bad == 0 and p > 0.001 and c.elapsed < limit
    record(2, "option run lengths", ok, c.elapsed, limit,
           f"fixed(k): {bad} of {checked} complete options off length k; zeta runs chi-square p={p:.3g} "
           f"over {lengths.size} options")
    assert ok


def test_criterion_03_epsilon_greedy_equivalence():
    limit = 30.0
    with Clock() as c:
        q = np.array([0.0, 1.0, 0.0, 0.0])
        steps = 200_000
        ez = ExplorationState(0.3, build_distribution("fixed", 1, 1), Xoshiro256(1))
        a_ez, _ = kernels.select_actions(ez, q, steps)
        r = Xoshiro256(2)
        a_std = np.array([epsilon_greedy_select(0.3, q, r) for _ in range(steps)])
        table = np.array([np.bincount(a_ez, minlength=4), np.bincount(a_std, minlength=4)])
        p = float(stats.chi2_contingency(table)[1])
        zs = []
        for eps, A, k in ((1.0, 4, 1), (1.0, 4, 2), (1.0, 4, 3), (0.5, 2, 3), (0.5, 4, 2)):
            rep = analysis.sequence_probability_check(eps, A, k, 10**6, seed=10 * k + A)
            zs.append(rep.z_score)
    worst = max(abs(z) for z in zs)
    ok = p > 0.001 and worst <= 3.0 and c.elapsed < limit
    record(3, "fixed(1) equals epsilon-greedy", ok, c.elapsed, limit,
           f"action-distribution chi-square p={p:.3g}; sequence z-scores {', '.join(f'{z:+.2f}' for z in zs)} "
           f"(need |z|<=3)")
    assert ok


def test_criterion_04_coverage():
    limit = 60.0
    with Clock() as c:
        zeta = build_distribution("zeta", 2.0, 10000)
        full = {}
        for name, env in (("grid_world", GridWorld()), ("deep_sea", DeepSea(20))):
            A, S = env.num_actions, env.num_states
            full[f"{name}/primitive"] = analysis.coverage_check(env, primitive_options(A), 0.1,
                                                                greedy_policy=[0] * S).full
            full[f"{name}/zeta"] = analysis.coverage_check(env, repeat_options(A, zeta), 0.1,
                                                           greedy_policy=[0] * S).full
        chain = Chain(4)
        exact_ok = True
        leaks = 0
        for k in (2, 3, 4):
            opts = [OptionSpec.after_exactly(a, k) for a in range(2)]
            res = analysis.coverage_check(chain, opts, 1.0)
            expected = [(x, 1) for x in range(chain.num_states) if x % k]
            exact_ok &= res.unreachable == expected
            ex = ExplorationState(1.0, build_distribution("fixed", k, k), Xoshiro256(k))
            _, first_pair, _ = kernels.explore_tabular(chain.model(), ex, None, 10**6)
            leaks += int(((first_pair >= 0) & ~res.reachable).sum())
    ok = all(full.values()) and exact_ok and leaks == 0 and c.elapsed < limit
    record(4, "coverage reachability", ok, c.elapsed, limit,
           f"full coverage {full}; multiples-of-k exact set {'matched' if exact_ok else 'MISMATCH'}; "
           f"{leaks} rollout visits to pairs flagged unreachable")
    assert ok


def test_criterion_05_deep_sea_speedup():
    limit = 120.0
    N = 10
    with Clock() as c:
        spec = {"kind": "deep_sea", "N": N}
        eps = episodes_to_first_goal(spec, {**EPS_POLICY, "epsilon": 1.0}, 101, 200_000)
        ez = episodes_to_first_goal(spec, {**EZ_POLICY, "epsilon": 1.0}, 101, 200_000)
        ratio = np.median(eps) / np.median(ez)
        # brute-force check of the per-episode success probabilities behind the guide
        p_ez = deep_sea_success_probability(truncated_pmf("zeta", 2.0, 10000), N)
        p_eps = 0.5 ** N
        m = DeepSea(N).model()
        z = []
        for p, dist in ((p_eps, build_distribution("fixed", 1, 1)), (p_ez, build_distribution("zeta", 2.0))):
            episodes = 400_000
            rows = kernels.q_learning(m, np.zeros((m.num_states, 2)),
                                      ExplorationState(1.0, dist, Xoshiro256(5)), 1.0, 0.99, episodes)
            hits = rows[:, 3].sum()
            z.append((hits / episodes - p) / math.sqrt(p * (1 - p) / episodes))
    ok = ratio >= 5.0 and max(abs(v) for v in z) < 4 and c.elapsed < limit
    record(5, "DeepSea discovery speed-up", ok, c.elapsed, limit,
           f"median episodes to goal eps={np.median(eps):.0f} ez={np.median(ez):.0f} ratio={ratio:.1f} (need >=5); "
           f"analytic medians eps={geometric_median(p_eps)} ez={geometric_median(p_ez)}; "
           f"success-rate z eps={z[0]:+.2f} ez={z[1]:+.2f}")
    assert ok


def test_criterion_06_deep_sea_learning():
    limit = 600.0
    N = 14
    budget_episodes = 500_000  # 500000 x N steps
    with Clock() as c:
        solved = {}
        for name, policy in (("eps", "eps_greedy"), ("ez", "ez_greedy")):
            cfg = config.resolve_run("deep_sea", {"env": {"N": N}, "exploration": {"policy": policy},
                                                  "episodes": budget_episodes, "eval_every": 1})
            res = run_experiment(cfg, WORKERS)
            solved[name] = [bool(np.nanmax(curve[:, 4]) >= 0.9) for curve in res.curves]
    n_ez, n_eps = sum(solved["ez"]), sum(solved["eps"])
    ok = n_ez >= 4 and n_eps <= 2 and c.elapsed < limit
    record(6, "DeepSea N=14 learning", ok, c.elapsed, limit,
           f"greedy return >=0.9 within {budget_episodes} episodes: ez {n_ez}/5 (need >=4), eps {n_eps}/5 "
           f"(need majority failing)")
    assert ok


def test_criterion_07_randomized_deep_sea():
    limit = 120.0
    with Clock() as c:
        spec = {"kind": "deep_sea", "N": 10, "randomized": True}
        eps = episodes_to_first_goal(spec, {**EPS_POLICY, "epsilon": 1.0}, 101, 1_000_000)
        ez = episodes_to_first_goal(spec, {**EZ_POLICY, "epsilon": 1.0}, 101, 1_000_000)
        ratio = np.median(ez) / np.median(eps)
    ok = 0.5 <= ratio <= 2.0 and c.elapsed < limit
    record(7, "randomized DeepSea parity", ok, c.elapsed, limit,
           f"median episodes to goal eps={np.median(eps):.0f} ez={np.median(ez):.0f}, ez/eps={ratio:.2f} "
           f"(need within [0.5, 2])")
    assert ok


def test_criterion_08_grid_world():
    limit = 300.0
    with Clock() as c:
        means = {}
        for name, policy in (("eps", "eps_greedy"), ("ez", "ez_greedy")):
            cfg = config.resolve_run("grid_world", {"exploration": {"policy": policy}})
            means[name] = float(run_experiment(cfg, WORKERS).final_mean("return", last=500).mean())
    margin = means["ez"] - means["eps"]
    ok = margin >= 0.25 and c.elapsed < limit
    record(8, "GridWorld final-500 margin", ok, c.elapsed, limit,
           f"mean return eps={means['eps']:.4f} ez={means['ez']:.4f} margin={margin:+.4f} (need >=0.25)")
    assert ok


def test_criterion_09_chain_sweep():
    limit = 600.0
    with Clock() as c:
        zeta = {r.value: r.mean for r in run_sweep(config.resolve_sweep("chain_zeta"), WORKERS)}
        uni = {r.value: r.mean for r in
               run_sweep(config.resolve_sweep("chain_uniform", {"values": [50]}), WORKERS)}
    ok = zeta[2] > zeta[1.01] and zeta[2] > zeta[6] and uni[50] < zeta[2] and c.elapsed < limit
    curve = ", ".join(f"{k}:{v:.3f}" for k, v in zeta.items())
    record(9, "chain sweep inverted U", ok, c.elapsed, limit,
           f"zeta mu->metric {curve}; uniform N=50 {uni[50]:.3f} (need mu=2 above mu=1.01, mu=6 and uniform)")
    assert ok


def test_criterion_10_cover_time_and_first_visit():
    limit = 300.0
    with Clock() as c:
        preset = config.COVER_TIME_PRESETS["open_grid"]
        medians = {}
        for name, ex in PURE_EXPLORATION.items():
            rep = analysis.cover_time(preset["env"], ex, preset["trials"], preset["budget"], seed=0,
                                      workers=WORKERS)
            medians[name] = rep.median
        cover_ok = None not in medians.values() and medians["ez_greedy"] < 0.5 * medians["eps_greedy"]
        grids = {name: analysis.preset_first_visit("open_grid", ex, seed=0, workers=WORKERS)
                 for name, ex in PURE_EXPLORATION.items()}
        corners = [(22, 0), (22, 22)]
        ratios = [grids["ez_greedy"].mean[rc] / grids["eps_greedy"].mean[rc] for rc in corners]
        visit_ok = all(r < 0.5 for r in ratios)
    ok = cover_ok and visit_ok and c.elapsed < limit
    record(10, "open-grid cover time and first visit", ok, c.elapsed, limit,
           f"median cover time eps={medians['eps_greedy']} ez={medians['ez_greedy']} "
           f"ratio={medians['ez_greedy'] / medians['eps_greedy']:.2f} (need <0.5); far-corner first-visit ratios "
           f"{', '.join(f'{r:.2f}' for r in ratios)} (need <0.5); corner means eps "
           f"{[round(float(grids['eps_greedy'].mean[rc])) for rc in corners]} "
           f"ez {[round(float(grids['ez_greedy'].mean[rc])) for rc in corners]}")
    assert ok


def test_criterion_11_linear_rl():
    limit = 1800.0
    with Clock() as c:
        reached = {}
        for name, policy in (("eps", "eps_greedy"), ("ez", "ez_greedy")):
            cfg = config.resolve_run("mountain_car", {"exploration": {"policy": policy}, "stop_on_goal": True})
            firsts = run_experiment(cfg, WORKERS).first_goal_episodes()
            reached[name] = sum(f is not None for f in firsts) / len(firsts)
        mc_ok = reached["ez"] >= 0.8 and reached["eps"] <= 0.2
        finals = {}
        for name, policy in (("eps", "eps_greedy"), ("ez", "ez_greedy")):
            cfg = config.resolve_run("cartpole", {"exploration": {"policy": policy}})
            finals[name] = run_experiment(cfg, WORKERS).final_mean("return", last=500)
        diff = finals["ez"] - finals["eps"]
        wins, losses = int((diff > 0).sum()), int((diff < 0).sum())
        p = float(stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue) if wins + losses else 1.0
        cp_ok = p < 0.05
    ok = mc_ok and cp_ok and c.elapsed < limit
    record(11, "MountainCar and CartPole", ok, c.elapsed, limit,
           f"MountainCar goal within 5000 episodes: ez {reached['ez']:.0%} (need >=80%), eps {reached['eps']:.0%} "
           f"(need <=20%); CartPole final-500 mean eps={finals['eps'].mean():.3f} ez={finals['ez'].mean():.3f}, "
           f"sign test {wins}-{losses} p={p:.3g} (need <0.05)")
    assert ok


def test_criterion_12_oracles():
    limit = 60.0
    with Clock() as c:
        from test_learners import CHAIN3, chain3_model
        target = value_iteration(CHAIN3["next_state"], CHAIN3["reward"], CHAIN3["terminal"], 0.9)
        table = np.zeros((3, 2))
        kernels.q_learning(chain3_model(), table, ExplorationState(1.0, build_distribution("zeta", 2.0),
                                                                   Xoshiro256(1)), 0.5, 0.9, 3000)
        vi_err = float(np.abs(table - target).max())

        sarsa_exact = True
        for factory, order in ((lambda: MountainCar(300), 5), (lambda: CartPoleSwingup(80, rng=Xoshiro256(3)), 2)):
            env_a, env_b = factory(), factory()
            basis = FourierBasis(order, env_a.low, env_a.high)
            W0 = np.random.default_rng(order).normal(0, 0.01, (3, basis.num_features))
            lq = LinearQ(basis, 3, W0)
            cfg = SarsaLambdaConfig(alpha=0.01, gamma=0.99, lam=0.0, order=order)
            ex_a = ExplorationState(0.2, build_distribution("zeta", 2.0), Xoshiro256(9))
            ex_b = ExplorationState(0.2, build_distribution("zeta", 2.0), Xoshiro256(9))
            traces = np.zeros_like(W0)
            W = W0.copy()
            for e in range(3):
                sarsa_lambda_episode(lq, traces, env_a, ex_a, cfg, e)
                ex_b.end_episode()
                W = one_step_sarsa(env_b, basis, W, ex_b.select, 0.01, 0.99)
            sarsa_exact &= bool(np.array_equal(lq.weights, W))

        rng = np.random.default_rng(0)
        worst = 0.0
        for dims, order in ((2, 5), (5, 2)):
            basis = FourierBasis(order, np.zeros(dims), np.ones(dims))
            lq = LinearQ(basis, 3, rng.normal(size=(3, basis.num_features)))
            for _ in range(5):
                x, a = rng.uniform(size=dims), int(rng.integers(3))
                g = lq.gradient(x, a)
                h = 1e-6
                for i in range(basis.num_features):
                    w = lq.weights[a, i]
                    lq.weights[a, i] = w + h
                    up = lq.q_eval(x, a)
                    lq.weights[a, i] = w - h
                    down = lq.q_eval(x, a)
                    lq.weights[a, i] = w
                    fd = (up - down) / (2 * h)
                    worst = max(worst, abs(fd - g[i]) / max(abs(g[i]), 1e-3))
    ok = vi_err <= 1e-9 and sarsa_exact and worst <= 1e-4 and c.elapsed < limit
    record(12, "numerical oracles", ok, c.elapsed, limit,
           f"Q-learning vs value iteration max err {vi_err:.1e} (need <=1e-9); SARSA(0) vs one-step oracle "
           f"{'exact' if sarsa_exact else 'DIFFERS'}; gradient vs central differences rel err {worst:.1e} (need <=1e-4)")
    assert ok


CLI_CASES = {
    "run": ("deep_sea", {"episodes": 200, "eval_every": 20}),
    "sweep": ("chain_zeta", {"trials": 4}),
    "first-visit": ("grid_world", {"trials": 20}),
    "cover-time": ("open_grid", {"trials": 5, "env": {"kind": "open_grid", "width": 9, "height": 9}}),
    "coverage": ("chain_multiples", {}),
}


def test_criterion_13_reproducibility(tmp_path):
    limit = 120.0
    with Clock() as c:
        mismatched = []
        compared = 0
        for command, (preset, overrides) in CLI_CASES.items():
            cfg_path = tmp_path / f"{command}.json"
            cfg_path.write_text(json.dumps(overrides))
            snaps = []
            for i, workers in enumerate((1, 1, 8, 8)):
                out = tmp_path / f"{command}-{i}"
                code = cli_main([command, "--preset", preset, "--config", str(cfg_path), "--out", str(out),
                                 "--workers", str(workers), "--seed", "11"])
                assert code == 0
                snaps.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            compared += sum(1 for n in snaps[0] if n.endswith((".csv", ".pgm")))
            if any(s != snaps[0] for s in snaps[1:]):
                mismatched.append(command)
    ok = not mismatched and compared > 0 and c.elapsed < limit
    record(13, "CLI byte-identical reruns", ok, c.elapsed, limit,
           f"{len(CLI_CASES)} commands x workers 1,1,8,8; {compared} CSV/PGM files per run compared; "
           f"mismatches: {mismatched or 'none'}")
    assert ok
