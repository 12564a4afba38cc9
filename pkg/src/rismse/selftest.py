"""Quick oracle checks run by ``rismse selftest``."""
from __future__ import annotations

import time

import numpy as np

from .alphabets import design_uniform_labels, gaussian_distortion, phase_alphabet
from .channel import pathloss_db, spatial_correlation
from .config import GeometryConfig
from .oracles import (
    brute_force_precoding_user,
    brute_force_ris,
    random_mils,
    random_precoding_case,
    random_ris_instance,
)
from .precoding import solve_subproblem_discrete
from .ris import ao_continuous, nearest_phase, optimize_ris_sesd
from .sesd import brute_force_mils, sesd_solve


def check_sesd(rng, count=200):
    qpsk = np.array([1, 1j, -1, -1j])
    bad = 0
    for i in range(count):
        n = int(rng.integers(1, 7))
        alph = qpsk[: int(rng.integers(2, 5))]
        prob = random_mils(rng, n, alph)
        a, b = sesd_solve(prob), brute_force_mils(prob)
        if abs(a.objective - b.objective) > 1e-9 or not np.array_equal(a.argmin, b.argmin):
            bad += 1
    return bad == 0, f"{count - bad}/{count} instances match enumeration"


def check_precoding(rng, count=20):
    qa = design_uniform_labels(2, 1.0)
    bad = 0
    for _ in range(count):
        D, mu = random_precoding_case(rng)
        for k in range(D.shape[0]):
            w, obj, _ = solve_subproblem_discrete(D, D[k], mu, qa)
            w_ref, obj_ref = brute_force_precoding_user(D, k, mu, qa)
            bad += abs(obj - obj_ref) > 1e-9 * max(1.0, abs(obj_ref))
    return bad == 0, f"{bad} mismatches over {count} channels"


def check_ris(rng, count=20):
    pa = phase_alphabet(1)
    bad = 0
    for _ in range(count):
        inst = random_ris_instance(rng, pa)
        theta0 = np.ones(inst.N, dtype=complex)
        theta, obj, exhausted = optimize_ris_sesd(inst, theta0)
        _, ref = brute_force_ris(inst)
        rounded = inst.objective(nearest_phase(ao_continuous(inst, theta0), pa))
        bad += (not exhausted) or abs(obj - ref) > 1e-9 or obj > rounded + 1e-9
    return bad == 0, f"{bad} mismatches over {count} instances"


def check_quantizer(rng=None):
    qa = design_uniform_labels(4, 1.0)
    grid = np.linspace(0.9, 1.1, 2001)
    ref = grid[np.argmin([gaussian_distortion(s, 4) for s in grid])]
    ok = abs(qa.step - ref) < 2e-4 and abs(qa.step - 0.9957) < 1e-3
    return ok, f"step {qa.step:.5f}, grid {ref:.5f}"


def check_channel(rng=None):
    C = spatial_correlation(GeometryConfig(), 8, 8, 0.3, -0.1)
    herm = np.max(np.abs(C - C.conj().T))
    diag = np.max(np.abs(np.diag(C) - 1))
    lam = np.linalg.eigvalsh(C).min()
    pl = pathloss_db(20.0)
    ok = herm <= 1e-12 and diag <= 1e-6 and lam >= -1e-8 and abs(pl + 66.1227) < 1e-3
    return ok, f"hermitian {herm:.1e}, diagonal {diag:.1e}, min eig {lam:.1e}, pathloss {pl:.4f} dB"


CHECKS = [
    ("sesd vs enumeration", check_sesd),
    ("discrete precoding vs enumeration", check_precoding),
    ("discrete RIS vs enumeration", check_ris),
    ("quantizer step vs grid search", check_quantizer),
    ("channel correlation and path loss", check_channel),
]


def run_selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    all_ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed check, not a crashed command
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t0:.2f}s)")
    return all_ok
