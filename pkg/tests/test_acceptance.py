"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 7 (solver optimality) and 8 (Gram normalisation) are evaluated on
every system built by the suites of criteria 1, 2, 5 and 6.
"""

import math
import time
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pytest

from conftest import random_histogram
from ergoid.cli import main as cli_main
from ergoid.config import ExperimentConfig
from ergoid.dynamics import density_lower_bound, sample_observations
from ergoid.experiments import fit_error_scaling, run_trial, screen_map, trial_seed
from ergoid.lasso import LassoConfig, l0_oracle, solve_lasso
from ergoid.sensing import build_measurement, covariance_from_density, empirical_gram
from ergoid.spectra import (
    lemma1_certificate,
    lemma2_certificate,
    re_estimate_monte_carlo,
    sample_size_bound,
)
from ergoid.trigpoly import random_sparse_map

MASTER = 20240601
SUPPORT_TOL = 1e-6
INSTRUMENT_EVERY = 10
RESULTS: List[str] = []


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@dataclass
class SolverAudit:
    """Observations gathered on every system for criteria 7 and 8."""

    systems: int = 0
    max_diag_dev: float = 0.0
    converged: int = 0
    max_kkt: float = 0.0
    instrumented: int = 0
    monotone_violations: List[str] = field(default_factory=list)

    def check_system(self, sys):
        self.systems += 1
        dev = float(np.abs(np.diag(empirical_gram(sys)) - 1).max())
        self.max_diag_dev = max(self.max_diag_dev, dev)

    def check_solution(self, sol):
        if sol.converged:
            self.converged += 1
            self.max_kkt = max(self.max_kkt, sol.kkt_residual)

    def instrument(self, sys, lam, tag):
        """Re-solve with per-sweep objective recording, with and without continuation."""
        runs = {
            "path": LassoConfig(lam, record_history=True),
            "plain": LassoConfig(lam, max_iterations=500, path_points_per_decade=0, record_history=True),
        }
        for kind, cfg in runs.items():
            sol = solve_lasso(sys, cfg)
            self.instrumented += 1
            for k, hist in enumerate(sol.objective_history):
                h = np.asarray(hist)
                slack = 1e-12 * np.abs(h[:-1]) + 1e-15
                if np.any(np.diff(h) > slack):
                    self.monotone_violations.append(f"{tag}/{kind}/stage{k}")


AUDIT = SolverAudit()


def run_cell(cfg, s, M, sigma, cell, trials, tag):
    out = []
    for t in range(trials):
        res = run_trial(cfg, s, M, sigma, trial_seed(cfg.seed, cell, t), t, cell)
        AUDIT.check_system(res.system)
        AUDIT.check_solution(res.solution)
        if t % INSTRUMENT_EVERY == 0:
            AUDIT.instrument(res.system, res.lam, f"{tag}/M{M}/s{sigma}/t{t}")
        out.append(res.strip())
    return out


@pytest.fixture(scope="module")
def suite1():
    cfg = ExperimentConfig(nmax=15, sparsity=(5,), sample_counts=(400,), noise=(0.0,), dc=0.5, budget=0.3,
                           strategy="consecutive", noiseless_lambda=1e-8, seed=MASTER)
    start = time.perf_counter()
    results = run_cell(cfg, 5, 400, 0.0, 0, 100, "c1")
    return results, time.perf_counter() - start


def _criterion2_instance(k):
    rng = np.random.default_rng(trial_seed(MASTER, 2, k))
    cfg = ExperimentConfig(nmax=4, density_length=20_000)
    while True:
        poly = random_sparse_map(3, 4, 0.5, 0.49, seed=int(rng.integers(2 ** 63)))
        traj, _, floor = screen_map(poly, cfg, float(rng.uniform()), 20_000)
        if floor >= cfg.xi_threshold:
            break
    obs = sample_observations(traj, 7, "uniform_indices", 0.0, seed=int(rng.integers(2 ** 63)))
    a = np.zeros(9, dtype=complex)
    supp = rng.choice(9, 2, replace=False)
    a[supp] = rng.normal(size=2) + 1j * rng.normal(size=2)
    blank = build_measurement((obs.x, np.zeros(7)), 4)
    return build_measurement((obs.x, blank.matvec(a)), 4)


@pytest.fixture(scope="module")
def suite2():
    start = time.perf_counter()
    rows = []
    for k in range(50):
        sys = _criterion2_instance(k)
        AUDIT.check_system(sys)
        sol = solve_lasso(sys, LassoConfig(1e-8))
        AUDIT.check_solution(sol)
        if k % INSTRUMENT_EVERY == 0:
            AUDIT.instrument(sys, 1e-8, f"c2/{k}")
        rows.append((tuple(sol.support(SUPPORT_TOL).tolist()), l0_oracle(sys, 2).support))
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def suite5():
    cfg = ExperimentConfig(nmax=15, sparsity=(3,), noise=(0.05,), seed=MASTER + 5)
    start = time.perf_counter()
    results = []
    for cell, M in enumerate((256, 512, 1024, 2048, 4096)):
        results += run_cell(cfg, 3, M, 0.05, cell, 50, "c5")
    return results, time.perf_counter() - start


@pytest.fixture(scope="module")
def suite6():
    cfg = ExperimentConfig(nmax=15, sparsity=(3,), sample_counts=(2048,), seed=MASTER + 6)
    results = []
    for cell, sigma in enumerate((0.01, 0.02, 0.04, 0.08)):
        results += run_cell(cfg, 3, 2048, sigma, cell, 50, "c6")
    return results


@pytest.fixture(scope="module")
def densities():
    rng = np.random.default_rng(trial_seed(MASTER, 3, 0))
    return [random_histogram(rng, float(rng.uniform(0.1, 1.0))) for _ in range(100)]


def test_criterion_01_noiseless_exact_recovery(suite1):
    results, elapsed = suite1
    wins = sum(r.success for r in results)
    ok = wins >= 95 and elapsed < 300
    assert report(1, ok, f"{wins}/100 exact recoveries (support and l1 <= 1e-4), {elapsed:.0f} s"), results


def test_criterion_02_l0_oracle_equivalence(suite2):
    rows, elapsed = suite2
    agree = sum(a == b for a, b in rows)
    ok = agree == 50 and elapsed < 60
    assert report(2, ok, f"{agree}/50 Lasso supports equal the l0 oracle (N=9, s=2, M=7), {elapsed:.1f} s")


def test_criterion_03_lemma1_certificate(densities):
    holds = [lemma1_certificate(covariance_from_density(d, 10), density_lower_bound(d)) for d in densities]
    n = sum(c.holds for c in holds)
    worst = min(c.lambda_min - c.xi_h for c in holds)
    assert report(3, n == 100, f"{n}/100 densities with lambda_min(V) >= xi_h - 1e-9 at N=21 "
                               f"(min margin {worst:.3g})")


def test_criterion_04_lemma2_certificate(densities):
    n = 0
    worst = math.inf
    for d in densities:
        V = covariance_from_density(d, 5)
        xi = density_lower_bound(d)
        certs = [lemma2_certificate(V, xi, s) for s in (1, 2, 3)]
        n += all(c.holds for c in certs)
        worst = min(worst, min(c.rho_min - xi for c in certs))
    assert report(4, n == 100, f"{n}/100 densities with rho_min(s, V^1/2) >= xi_h - 1e-9 for s=1,2,3 at N=11 "
                               f"(min margin {worst:.3g})")


def test_criterion_05_error_scaling_in_M(suite5):
    results, elapsed = suite5
    fit = fit_error_scaling(results, "M")
    ok = -0.65 <= fit.slope <= -0.35 and elapsed < 1800
    medians = ", ".join(f"{m:.4g}" for m in fit.medians)
    assert report(5, ok, f"slope {fit.slope:.3f} +- {fit.half_width:.3f} (target [-0.65, -0.35]); "
                         f"medians {medians}; {elapsed:.0f} s")


def test_criterion_06_error_scaling_in_sigma(suite6):
    fit = fit_error_scaling(suite6, "sigma")
    ok = 0.8 <= fit.slope <= 1.2
    assert report(6, ok, f"slope {fit.slope:.3f} +- {fit.half_width:.3f} (target [0.8, 1.2])")


def test_criterion_07_solver_optimality(suite1, suite2, suite5, suite6):
    ok = AUDIT.max_kkt <= 1e-8 and not AUDIT.monotone_violations and AUDIT.instrumented > 0
    assert report(7, ok, f"max KKT residual {AUDIT.max_kkt:.2e} over {AUDIT.converged} converged solves; "
                         f"{len(AUDIT.monotone_violations)} monotonicity violations in "
                         f"{AUDIT.instrumented} instrumented runs"), AUDIT.monotone_violations


def test_criterion_08_gram_normalisation(suite1, suite2, suite5, suite6):
    ok = AUDIT.max_diag_dev <= 1e-12
    assert report(8, ok, f"max |diag(G*G/M) - 1| = {AUDIT.max_diag_dev:.2e} over {AUDIT.systems} systems")


def test_criterion_09_corollary_kappa():
    cfg = ExperimentConfig(nmax=15, budget=0.49, screen="circle", xi_threshold=0.3)
    wins = 0
    ratios = []
    for k in range(100):
        rng = np.random.default_rng(trial_seed(MASTER, 9, k))
        for _ in range(cfg.max_retries):
            poly = random_sparse_map(3, 15, 0.5, 0.49, seed=int(rng.integers(2 ** 63)))
            traj, xi, _ = screen_map(poly, cfg, float(rng.uniform()), cfg.density_length)
            if xi >= 0.3:
                break
        else:
            pytest.fail("no map with xi_h >= 0.3")
        M = 4 * sample_size_bound(3, 31, xi, 1.0)
        sys = build_measurement(sample_observations(traj, M, "consecutive", 0.0), 15)
        AUDIT.check_system(sys)
        est = re_estimate_monte_carlo(sys.G / math.sqrt(M), 3, 3.0, 2000, rng_seed=int(rng.integers(2 ** 63)))
        wins += est.kappa_estimate <= 2 / math.sqrt(xi)
        ratios.append(est.kappa_estimate * math.sqrt(xi))
    assert report(9, wins >= 90, f"{wins}/100 trials with kappa <= 2 xi_h^-1/2 "
                                 f"(max kappa sqrt(xi_h) = {max(ratios):.3f})")


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("nmax = 6\nsample_counts = [100]\nnoise = [0.02]\ndensity_length = 20000\n")
    grid = tmp_path / "grid.toml"
    grid.write_text("nmax = 5\ntrials = 3\nsample_counts = [50, 100]\nnoise = [0.0, 0.05]\n"
                    "density_length = 20000\n")

    def snapshot(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    runs = {}
    for name, argv in {
        "id1": ["identify", "--config", str(cfg), "--seed", "42"],
        "id2": ["identify", "--config", str(cfg), "--seed", "42"],
        "pd1": ["phase-diagram", "--config", str(grid), "--seed", "42"],
        "pd2": ["phase-diagram", "--config", str(grid), "--seed", "42", "--threads", "0"],
        "pj1": ["phase-diagram", "--config", str(grid), "--seed", "42", "--format", "json"],
        "pj2": ["phase-diagram", "--config", str(grid), "--seed", "42", "--format", "json"],
    }.items():
        assert cli_main(argv + ["--out", str(tmp_path / name)]) == 0
        runs[name] = snapshot(tmp_path / name)
    pairs = [("id1", "id2"), ("pd1", "pd2"), ("pj1", "pj2")]
    same = [runs[a] == runs[b] for a, b in pairs]
    files = sum(len(runs[a]) for a, _ in pairs)
    assert report(10, all(same), f"{sum(same)}/3 repeated runs byte-identical ({files} files compared)")
