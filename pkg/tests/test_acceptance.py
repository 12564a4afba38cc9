"""Acceptance checks, one test per criterion.

Each test records a ``CRITERION n: PASS|FAIL`` line with the measured
numbers; conftest prints them in the terminal summary. Criteria 5 to 8 run
the full-size Monte Carlo experiments and take about two hours on
one core.
"""
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from rismse.alphabets import design_uniform_labels, gaussian_distortion, phase_alphabet
from rismse.bcd import mse_user, receiver_gains
from rismse.channel import draw_bs_ris, draw_channels, pathloss_db, spatial_correlation, trial_rng
from rismse.config import GeometryConfig, SystemConfig
from rismse.harness import read_result_csv, run_convergence_experiment, run_sumrate_sweep
from rismse.oracles import (
    brute_force_precoding_user,
    brute_force_ris,
    random_mils,
    random_precoding_case,
    random_ris_instance,
)
from rismse.precoding import solve_subproblem_discrete
from rismse.ris import RisInstance, ao_continuous, nearest_phase, optimize_ris_sesd
from rismse.sesd import brute_force_mils, sesd_solve


def report(n, ok, detail):
    ACCEPTANCE[n] = (ok, detail)
    print(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_01_sesd_exactness():
    rng = np.random.default_rng(1)
    qpsk = np.array([1, 1j, -1, -1j])
    t0 = time.perf_counter()
    bad = 0
    for _ in range(500):
        n = int(rng.integers(1, 7))
        prob = random_mils(rng, n, qpsk[: int(rng.integers(1, 5))])
        a, b = sesd_solve(prob), brute_force_mils(prob)
        bad += abs(a.objective - b.objective) > 1e-9 or not np.array_equal(a.argmin, b.argmin)
    dt = time.perf_counter() - t0
    report(1, bad == 0 and dt < 10, f"{500 - bad}/500 instances match enumeration in {dt:.2f}s")


def test_criterion_02_precoding_exactness():
    rng = np.random.default_rng(2)
    qa = design_uniform_labels(2, 1.0)
    t0 = time.perf_counter()
    bad = checked = 0
    for _ in range(100):
        D, mu = random_precoding_case(rng, K=3, M=4)
        for k in range(3):
            w, obj, exhausted = solve_subproblem_discrete(D, D[k], mu, qa)
            w_ref, obj_ref = brute_force_precoding_user(D, k, mu, qa)
            checked += 1
            bad += (not exhausted) or abs(obj - obj_ref) > 1e-9 or not np.array_equal(w, w_ref)
    dt = time.perf_counter() - t0
    report(2, bad == 0 and dt < 30, f"{checked - bad}/{checked} per-user solves match 4^4 enumeration in {dt:.2f}s")


def test_criterion_03_ris_exactness():
    rng = np.random.default_rng(3)
    pa = phase_alphabet(1)
    t0 = time.perf_counter()
    mismatch = worse = 0
    for _ in range(100):
        inst = random_ris_instance(rng, pa, N=10)
        start = pa.coefficients[rng.integers(0, 2, 10)]
        theta, obj, exhausted = optimize_ris_sesd(inst, start)
        _, ref = brute_force_ris(inst)
        mismatch += (not exhausted) or abs(obj - ref) > 1e-9
        worse += obj > inst.objective(nearest_phase(ao_continuous(inst, start), pa)) + 1e-12
    dt = time.perf_counter() - t0
    report(3, mismatch == 0 and worse == 0 and dt < 60,
           f"{100 - mismatch}/100 match 2^10 enumeration, {worse} worse than rounded AO, {dt:.2f}s")


def test_criterion_04_alpha_invariance():
    rng = np.random.default_rng(4)
    pa = phase_alphabet(1)
    spread = 0.0
    all_exhausted = True
    for _ in range(20):
        base = random_ris_instance(rng, pa, N=10)
        objs = []
        for alpha in (0.5, 1.0, 2.0):
            _, obj, exhausted = optimize_ris_sesd(RisInstance(base.A, base.a, pa, alpha))
            all_exhausted &= exhausted
            objs.append(obj)
        spread = max(spread, max(objs) - min(objs))
    report(4, all_exhausted and spread <= 1e-9, f"max objective spread over alpha {spread:.1e} on 20 instances")


@pytest.mark.slow
def test_criterion_05_mmse_identities(convergence_run):
    _, states = convergence_run
    worst = 0.0
    count = 0
    for s in states:
        for rec in s["trace"]:
            e = np.array(rec["per_user_mse"])
            sinr = np.array(rec["per_user_sinr"])
            worst = max(worst, float(np.max(np.abs(e - 1 / (1 + sinr)))))
            count += e.size
    # perturbation checks on random feasible states
    cfg = SystemConfig()
    qa = design_uniform_labels(cfg.L, cfg.label_sigma)
    pa = phase_alphabet(cfg.b)
    rng = np.random.default_rng(5)
    failures = 0
    for i in range(500):
        if i % 50 == 0:
            ch = draw_channels(cfg, trial_rng(77, i))
        W = qa.points[rng.integers(0, qa.points.size, (cfg.M, cfg.K))]
        theta = pa.coefficients[rng.integers(0, pa.size, cfg.N)]
        beta = receiver_gains(theta, ch.F, W, cfg.N0)
        k = int(rng.integers(0, cfg.K))
        e0 = mse_user(theta, ch.F[k], W, beta[k], cfg.N0, k)
        step = 1e-4 * abs(beta[k]) * np.exp(2j * np.pi * rng.uniform())
        failures += not all(
            mse_user(theta, ch.F[k], W, beta[k] + d, cfg.N0, k) > e0 for d in (step, -step, 1j * step, -1j * step)
        )
    report(5, worst <= 1e-10 and failures == 0,
           f"max |e_k - 1/(1+SINR_k)| = {worst:.1e} over {count} user-iterations; "
           f"{500 - failures}/500 perturbation checks raise e_k")


@pytest.fixture(scope="module")
def convergence_run(tmp_path_factory):
    cfg = SystemConfig(trials=20, sesd_node_budget=10**7)
    out = tmp_path_factory.mktemp("converge")
    t0 = time.perf_counter()
    run_convergence_experiment(cfg, out)
    elapsed = time.perf_counter() - t0
    states = [json.loads(l) for l in (out / "convergence_states.jsonl").read_text().splitlines()]
    return elapsed, states


@pytest.mark.slow
def test_criterion_06_substep_descent(convergence_run):
    _, states = convergence_run
    iters = beta_up = ris_exact = ris_exact_up = 0
    increases = gap = budget = 0
    for s in states:
        for rec in s["trace"][1:]:
            iters += 1
            beta_up += rec["sum_mse"] > rec["mse_after_ris"] + 1e-9
            if rec["ris_exhausted"]:
                ris_exact += 1
                ris_exact_up += rec["mse_after_ris"] > rec["mse_after_precoding"] + 1e-9
        for a in s["anomalies"]:
            increases += 1
            gap += "precoding" in a["causes"]
            budget += "ris_budget" in a["causes"]
    rate = increases / iters
    ok = beta_up == 0 and ris_exact_up == 0 and rate < 0.05
    report(6, ok,
           f"beta-step increases {beta_up}, exhausted RIS-step increases {ris_exact_up} of {ris_exact}; "
           f"full-iteration increases {increases}/{iters} = {rate:.1%} "
           f"(precoding duality gap involved in {gap}, budget-limited RIS step in {budget})")


@pytest.mark.slow
def test_criterion_07_convergence(convergence_run):
    elapsed, states = convergence_run
    iters = np.array([s["iterations"] for s in states])
    conv = np.array([s["converged"] for s in states])
    within = float(np.mean(conv & (iters <= 25)))
    med = float(np.median(iters))
    ok = within >= 0.8 and 5 <= med <= 25 and elapsed <= 1800
    report(7, ok,
           f"{within:.0%} of {len(states)} trials converge within 25 iterations, median {med:g} iterations, "
           f"{int(conv.sum())}/{len(states)} converge within the cap, {elapsed / 60:.1f} min")


@pytest.fixture(scope="module")
def sweep_run(tmp_path_factory):
    cfg = SystemConfig(trials=50, sesd_node_budget=10**7, power_sweep_dbm=(10.0, 30.0, 40.0))
    out = tmp_path_factory.mktemp("sweep")
    run_sumrate_sweep(cfg, out)
    return read_result_csv(out / "sweep_trials.csv")[1]


@pytest.mark.slow
def test_criterion_08_benchmark_ordering(sweep_run):
    rate = {}
    for r in sweep_run:
        rate.setdefault((float(r["P_dbm"]), r["scheme"]), {})[int(r["trial"])] = float(r["sum_rate"])

    def mean(p, s):
        return float(np.mean(list(rate[p, s].values())))

    def paired(p):
        d = np.array([rate[p, "SesdBoth"][t] - rate[p, "NoSesd"][t] for t in sorted(rate[p, "SesdBoth"])])
        return d.mean(), d.std(ddof=1) / np.sqrt(d.size)

    m = {s: mean(30.0, s) for s in ("SesdBoth", "SesdPrecodingOnly", "SesdRisOnly", "NoSesd")}
    gap30, se30 = paired(30.0)
    gap10, _ = paired(10.0)
    gap40, _ = paired(40.0)
    ok = (m["SesdBoth"] >= m["SesdPrecodingOnly"] and m["SesdBoth"] >= m["SesdRisOnly"]
          and m["SesdBoth"] >= m["NoSesd"] and gap30 >= 2 * se30 and gap40 > gap10)
    detail = (", ".join(f"{s} {v:.3f}" for s, v in m.items())
              + f" bit/s/Hz at 30 dBm; SesdBoth-NoSesd gap {gap30:.3f} (paired SE {se30:.3f}); "
              f"gap at 10 dBm {gap10:.3f}, at 40 dBm {gap40:.3f}")
    report(8, ok, detail)


def test_criterion_09_channel_statistics():
    geom = GeometryConfig()
    worst_h = worst_d = 0.0
    min_eig = np.inf
    for az, el in ((geom.ris_aoa_az, geom.ris_aoa_el), (0.5, -0.1), (1.0, -0.26)):
        C = spatial_correlation(geom, 8, 8, az, el)
        worst_h = max(worst_h, float(np.max(np.abs(C - C.conj().T))))
        worst_d = max(worst_d, float(np.max(np.abs(np.diag(C) - 1))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(C).min()))
    pl = pathloss_db(20.0)
    cfg = SystemConfig()
    rng = np.random.default_rng(9)
    rho = 10 ** (pl / 10)
    ratio = np.mean([np.sum(np.abs(draw_bs_ris(cfg, rng)) ** 2) for _ in range(10**4)]) / (cfg.N * cfg.M * rho)
    ok = worst_h <= 1e-12 and worst_d <= 1e-6 and min_eig >= -1e-8 and abs(pl + 66.1227) <= 1e-3 and abs(ratio - 1) <= 0.02
    report(9, ok, f"hermitian {worst_h:.1e}, diagonal {worst_d:.1e}, min eig {min_eig:.1e}, "
                  f"pathloss(20 m) {pl:.4f} dB, E||H||^2/(NM rho) {ratio:.4f}")


def test_criterion_10_quantizer_design():
    two = design_uniform_labels(2, 1.0)
    four = design_uniform_labels(4, 1.0)
    g2 = np.linspace(1.2, 2.0, 8001)
    g4 = np.linspace(0.8, 1.2, 8001)
    ref2 = g2[np.argmin([gaussian_distortion(s, 2) for s in g2])] / 2
    ref4 = g4[np.argmin([gaussian_distortion(s, 4) for s in g4])]
    ok = (abs(two.labels[1] - 0.7979) <= 1e-3 and abs(two.labels[1] - ref2) <= 1e-4
          and abs(four.step - 0.9957) <= 1e-3 and abs(four.step - ref4) <= 1e-4)
    report(10, ok, f"L=2 level {two.labels[1]:.5f} (grid {ref2:.5f}), L=4 step {four.step:.5f} (grid {ref4:.5f})")
