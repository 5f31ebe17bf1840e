"""
Acceptance criteria, one test each. Every test prints a single PASS/FAIL
line (also collected in the pytest terminal summary).
"""

import itertools
import math
import time

import numpy as np
import pytest

from partial_ia.channels import gen_fig3_example, gen_fully_connected, gen_symmetric
from partial_ia.evaluation import (ExperimentConfig, estimate_dof, per_pair_rate,
                                   run_experiment, theorem_df, verify_theorem)
from partial_ia.feasibility import (FreedomConstraintInstance, brute_force_proper,
                                    flow_check, tree_check)
from partial_ia.stage1 import (count_instance, design_subspaces, init_streams,
                               removal_gains, stage1_run)
from partial_ia.stage2 import stage2_run
from partial_ia.subspace import Subspace

from conftest import record_criterion

pytestmark = pytest.mark.acceptance


def random_instance(rng):
    K = int(rng.integers(1, 5))
    c = rng.integers(0, 5, (K, K))
    np.fill_diagonal(c, 0)
    return FreedomConstraintInstance(rng.integers(0, 5, K), rng.integers(0, 5, K), c)


def test_c1_feasibility_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        inst = random_instance(rng)
        a = tree_check(inst).proper
        bad += not (a == flow_check(inst) == brute_force_proper(inst).proper)
    dt = time.perf_counter() - t0
    record_criterion("1 feasibility equivalence", bad == 0 and dt <= 10.0,
                     f"{bad} disagreements on 1000 instances in {dt:.2f} s (limit 10 s)")


def dense_instance(K, rng):
    c = rng.integers(1, 5, (K, K))
    np.fill_diagonal(c, 0)
    hi = int(2.5 * K) + 1
    return FreedomConstraintInstance(rng.integers(0, hi, K), rng.integers(0, hi, K), c)


def test_c2_step_count_scaling():
    ratios = {}
    for K in (5, 10, 20, 40, 80):
        rng = np.random.default_rng(K)
        steps = [tree_check(dense_instance(K, rng)).steps for _ in range(5)]
        ratios[K] = float(np.mean(steps)) / K ** 3
    base = ratios[5]
    worst = max(ratios.values()) / base
    detail = ", ".join(f"K={K}: {r:.4f}" for K, r in ratios.items())
    record_criterion("2 complexity scaling", worst <= 3.0,
                     f"steps/K^3 {detail}; worst ratio to K=5 is {worst:.2f} (limit 3)")


def test_c3_golden_five_pairs():
    topo, real = gen_fig3_example(seed=0)
    d0 = init_streams(topo, real, 1)
    s_t, s_r = design_subspaces(topo, d0)
    raw = removal_gains(d0, s_t, s_r, topo)
    gains = [int(g) for g in raw] if np.all(raw == np.round(raw)) else raw.tolist()
    a = stage1_run(topo, real, 1)
    design, report = stage2_run(a, real, seed=0)
    rates = [per_pair_rate(design, a, real, 10 ** (s / 10)).sum() for s in (40.0, 60.0)]
    slope = (rates[1] - rates[0]) / (2 * math.log2(10))
    # brute-force stream bound of the fully connected network of the same size
    ftopo, _ = gen_fully_connected(5, 2, 2, seed=0)
    full = [Subspace.full(2)] * 5
    best = max(sum(d) for d in itertools.product((0, 1), repeat=5)
               if brute_force_proper(count_instance(d, full, full, ftopo)).proper)
    ok = (a.d == (1, 1, 0, 1, 1) and gains == [3, 3, 6, 3, 3] and report.total <= 1e-10
          and sum(a.d) == 4 and round(slope) == 4 and best == 3)
    record_criterion("3 golden 5-pair example", ok,
                     f"D* = {a.d}, gains {gains}, leakage {report.total:.2e}, "
                     f"DoF {sum(a.d)} (slope {slope:.3f}), fully connected bound {best}")


THEOREM_CASES = [(6, 4, 4, 1, 4, 2), (8, 4, 4, 1, 4, 0), (5, 3, 3, 2, 3, 1)]


def test_c4_theorem_achievability():
    parts, ok = [], True
    for K, Nt, Nr, L, E1, E2 in THEOREM_CASES:
        d_f = min(theorem_df(K, Nt, Nr, L, E1, E2), E1, Nr)
        rate = verify_theorem(K, Nt, Nr, L, E1, E2, d_f, range(20))
        ok &= rate >= 0.9
        parts.append(f"K={K},E2={E2},L={L}: d_f={d_f} rate {rate:.2f}")
    record_criterion("4 theorem achievability", ok, "; ".join(parts) + " (need >= 0.90)")


def test_c5_fully_connected_compatibility():
    worst = 0.0
    proper3 = True
    for seed in range(10):
        topo, real = gen_fully_connected(3, 2, 2, seed=seed)
        a = stage1_run(topo, real, 1)
        proper3 &= a.d == (1, 1, 1)
        _, report = stage2_run(a, real, seed=seed)
        worst = max(worst, report.total)
    topo4, _ = gen_fully_connected(4, 2, 2, seed=0)
    full = [Subspace.full(2)] * 4
    inst = count_instance([1] * 4, full, full, topo4)
    verdicts = (tree_check(inst).proper, flow_check(inst), brute_force_proper(inst).proper)
    ok = proper3 and worst <= 1e-8 and not any(verdicts)
    record_criterion("5 fully connected compatibility", ok,
                     f"K=3 proper={proper3}, worst leakage {worst:.2e} (limit 1e-8); "
                     f"K=4 verdicts {verdicts}")


def test_c6_monotone_descent():
    violations, runs = 0, 0
    for seed in range(100):
        topo, real = gen_symmetric(5, 3, 3, 1, 3, 2, seed=seed)
        a = stage1_run(topo, real, 2)
        _, report = stage2_run(a, real, max_iters=300, seed=seed)
        h = np.asarray(report.history)
        violations += int(np.any(np.diff(h) > 1e-12 * h[0]))
        runs += 1
    record_criterion("6 monotone descent", violations == 0,
                     f"{violations} of {runs} runs with an increasing half-step "
                     f"(relative tolerance 1e-12)")


def test_c7_dense_network_ordering():
    cfg = ExperimentConfig(model="geometric", K=8, Nt=6, Nr=6, d_max=2, area_km=10.0,
                           L_km=5.0, S_km=3.0, pair_radius_km=1.0, drops=20,
                           snr_db=(0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0),
                           schemes=("proposed", "bl1", "bl5"), seed=7)
    t0 = time.perf_counter()
    recs = run_experiment(cfg)
    dt = time.perf_counter() - t0
    dof = {s: estimate_dof(recs, 40.0, 60.0, s) for s in cfg.schemes}
    ordering = dof["proposed"] >= dof["bl1"] and dof["proposed"] >= dof["bl5"]
    saturates = dof["bl1"] <= 0.2 * dof["proposed"]
    ok = ordering and saturates and dt <= 600
    record_criterion("7 dense network ordering", ok,
                     f"slopes proposed {dof['proposed']:.2f}, bl1 {dof['bl1']:.2f}, "
                     f"bl5 {dof['bl5']:.2f}; ordering {ordering}, bl1 saturation "
                     f"(<= 20% of proposed) {saturates}; {dt:.0f} s (limit 600)")


def sign_test_p(wins: int, n: int) -> float:
    """One-sided p-value of at least ``wins`` successes in ``n`` fair trials."""
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2 ** n


@pytest.mark.parametrize("preset", ["fig8-desk", "fig9-desk"])
def test_c8_throughput_falls_with_reach(preset):
    from partial_ia.cli import PRESETS
    cfg = ExperimentConfig.from_dict(PRESETS[preset])
    recs = run_experiment(cfg)
    M = np.array([[r.sum_rate / cfg.K for r in recs if r.sweep_value == v]
                  for v in cfg.sweep_values])
    means = M.mean(axis=1)
    wins = int(np.sum(M[0] > M[-1]))
    p = sign_test_p(wins, cfg.drops)
    monotone = bool(np.all(np.diff(means) <= 0))
    record_criterion(f"8 {cfg.sweep_param} sweep", monotone and p < 0.05,
                     f"mean rate per pair {np.round(means, 2).tolist()} over "
                     f"{cfg.sweep_param} {list(cfg.sweep_values)}; non-increasing {monotone}; "
                     f"first > last on {wins}/{cfg.drops} drops, sign test p = {p:.4f}")
