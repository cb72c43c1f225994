"""Seeded end-to-end identification trials, phase diagrams and scaling fits."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .dynamics import (
    ObservationSet,
    Trajectory,
    density_lower_bound,
    estimate_density,
    map_range,
    relative_floor,
    sample_observations,
    simulate,
    write_observations_csv,
)
from .exceptions import ErgoidError, ExperimentError, FitError
from .lasso import LassoConfig, LassoSolution, lambda_rule, save_solution, solve_lasso
from .sensing import MeasurementSystem, build_measurement
from .trigpoly import (
    FrequencySet,
    TrigPoly,
    random_sparse_map,
    save_trigpoly,
    trigpoly_to_dict,
    wiener_norm,
)

log = logging.getLogger(__name__)

PHASE_HEADER = ("s", "M", "sigma", "trial", "seed", "l1_error", "wiener_error",
                "support_recovered", "kkt_residual", "xi_h", "lambda", "wall_ms")
SUMMARY_HEADER = ("s", "M", "sigma", "trials", "failures", "successes", "success_rate",
                  "support_rate", "median_l1_error")
SUCCESS_L1 = 1e-4


def hash64(*parts: int) -> int:
    """Counter-based seed split: BLAKE2b-64 of the little-endian uint64 parts."""
    data = b"".join(struct.pack("<Q", int(p) % 2 ** 64) for p in parts)
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def trial_seed(master: int, cell_index: int, trial_index: int) -> int:
    return hash64(master, cell_index, trial_index)


@dataclass
class TrialResult:
    seed: int
    s: int
    M: int
    sigma: float
    trial: int = 0
    cell: int = 0
    map: Optional[TrigPoly] = None
    xi_h: float = math.nan
    screen_floor: float = math.nan
    lam: float = math.nan
    l1_error: float = math.nan
    wiener_error: float = math.nan
    support_recovered: bool = False
    success: bool = False
    kkt_residual: float = math.nan
    converged: bool = False
    iterations: int = 0
    attempts: int = 0
    wall_ms: float = 0.0
    error: Optional[str] = None
    solution: Optional[LassoSolution] = field(default=None, repr=False)
    system: Optional[MeasurementSystem] = field(default=None, repr=False)
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_row(self) -> dict:
        return {
            "s": self.s, "M": self.M, "sigma": self.sigma, "trial": self.trial, "seed": self.seed,
            "l1_error": self.l1_error, "wiener_error": self.wiener_error,
            "support_recovered": int(self.support_recovered), "kkt_residual": self.kkt_residual,
            "xi_h": self.xi_h, "lambda": self.lam, "wall_ms": self.wall_ms,
        }

    def to_dict(self) -> dict:
        d = self.to_row()
        d.update({
            "cell": self.cell, "screen_floor": self.screen_floor, "success": self.success,
            "converged": self.converged, "iterations": self.iterations, "attempts": self.attempts,
            "error": self.error,
            "map": trigpoly_to_dict(self.map) if self.map is not None else None,
        })
        return d

    def strip(self) -> "TrialResult":
        """Drop the heavy arrays (for shipping results between processes)."""
        self.solution = self.system = self.trajectory = None
        return self


def screen_map(poly: TrigPoly, cfg: ExperimentConfig, x0: float, length: int):
    """Simulate a candidate map and compute its density floors.

    Returns ``(trajectory, xi_h, screen_floor)`` where ``xi_h`` is the floor
    over the whole circle and ``screen_floor`` the value compared with
    ``cfg.xi_threshold``.
    """
    traj = simulate(poly, x0, cfg.burn_in, length)
    head = traj.states[: cfg.density_length]
    xi_h = density_lower_bound(estimate_density(head, cfg.density_bins))
    if cfg.screen == "circle":
        return traj, xi_h, xi_h
    lo, hi = map_range(poly)
    if not hi > lo:
        return traj, xi_h, 0.0
    window = (lo, float(np.nextafter(hi, np.inf)))
    floor = relative_floor(estimate_density(head, cfg.density_bins, window))
    return traj, xi_h, floor


def _required_length(cfg: ExperimentConfig, M: int) -> int:
    if cfg.strategy == "strided":
        need = (M - 1) * cfg.stride + 2
    else:
        need = M + 1
    return max(cfg.density_length, need)


def choose_lambda(cfg: ExperimentConfig, sigma: float, N: int, M: int) -> float:
    if cfg.lambda_override is not None:
        return float(cfg.lambda_override)
    if sigma == 0:
        return float(cfg.noiseless_lambda)
    return lambda_rule(sigma, N, M, cfg.lambda_constant)


def run_trial(cfg: ExperimentConfig, s: int, M: int, sigma: float, seed: int,
              trial: int = 0, cell: int = 0) -> TrialResult:
    """Generate, screen, simulate, sample, solve and score one instance."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    freqs = FrequencySet(cfg.nmax)
    length = _required_length(cfg, M)
    for attempt in range(1, cfg.max_retries + 1):
        poly = random_sparse_map(s, freqs, cfg.dc, cfg.budget, seed=int(rng.integers(2 ** 63)))
        x0 = float(rng.uniform())
        traj, xi_h, floor = screen_map(poly, cfg, x0, length)
        if floor >= cfg.xi_threshold:
            break
        log.debug("seed %d attempt %d: screen floor %.3g below %.3g", seed, attempt, floor, cfg.xi_threshold)
    else:
        raise ExperimentError(
            f"no generated map passed the {cfg.screen} density screen "
            f"(floor >= {cfg.xi_threshold}) in {cfg.max_retries} attempts")
    obs = sample_observations(traj, M, cfg.strategy, sigma, seed=int(rng.integers(2 ** 63)),
                              stride=cfg.stride)
    sys = build_measurement(obs, freqs)
    lam = choose_lambda(cfg, sigma, freqs.size, M)
    sol = solve_lasso(sys, LassoConfig(lam, cfg.max_iterations, cfg.tolerance, cfg.symmetrize,
                                       cfg.path_points_per_decade))
    truth = poly.to_dense(freqs)
    diff = sol.coeffs - truth
    # same modulus routine as wiener_norm, so the two metrics agree bit for bit
    l1 = math.fsum(abs(complex(c)) for c in diff)
    wiener = wiener_norm(TrigPoly.from_dense(diff, freqs))
    threshold = max(lam, cfg.support_tol)
    recovered = set(np.flatnonzero(np.abs(sol.coeffs) > threshold).tolist()) == set(np.flatnonzero(truth).tolist())
    elapsed = (time.perf_counter() - start) * 1e3 if cfg.record_timing else 0.0
    return TrialResult(
        seed=seed, s=s, M=M, sigma=float(sigma), trial=trial, cell=cell, map=poly, xi_h=xi_h,
        screen_floor=floor, lam=lam, l1_error=l1, wiener_error=wiener,
        support_recovered=recovered,
        success=bool(sigma == 0 and recovered and l1 <= SUCCESS_L1),
        kkt_residual=sol.kkt_residual, converged=sol.converged, iterations=sol.iterations_used,
        attempts=attempt, wall_ms=elapsed, solution=sol, system=sys, trajectory=traj,
    )


def run_identification(cfg: ExperimentConfig) -> TrialResult:
    """Single identification run on the first grid value of every axis."""
    return run_trial(cfg, cfg.sparsity[0], cfg.sample_counts[0], cfg.noise[0],
                     trial_seed(cfg.seed, 0, 0))


def grid_cells(cfg: ExperimentConfig):
    """``(cell_index, s, M, sigma)`` in s-major, then M, then sigma order."""
    k = 0
    for s in cfg.sparsity:
        for M in cfg.sample_counts:
            for sigma in cfg.noise:
                yield k, s, M, sigma
                k += 1


def _run_task(task) -> TrialResult:
    cfg, s, M, sigma, seed, trial, cell = task
    try:
        return run_trial(cfg, s, M, sigma, seed, trial, cell).strip()
    except ErgoidError as exc:
        return TrialResult(seed=seed, s=s, M=M, sigma=float(sigma), trial=trial, cell=cell,
                           error=f"{type(exc).__name__}: {exc}")


def resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ValueError("threads must be non-negative")
    return threads or (os.cpu_count() or 1)


def run_phase_diagram(cfg: ExperimentConfig, threads: int = 1) -> List[TrialResult]:
    """All seeded trials of the (s, M, sigma) grid, in cell then trial order.

    Failed trials are kept as rows carrying an ``error`` message.
    """
    tasks = [(cfg, s, M, sigma, trial_seed(cfg.seed, cell, t), t, cell)
             for cell, s, M, sigma in grid_cells(cfg) for t in range(cfg.trials)]
    workers = min(resolve_threads(threads), len(tasks))
    if workers <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


@dataclass(frozen=True)
class CellSummary:
    s: int
    M: int
    sigma: float
    trials: int
    failures: int
    successes: int
    success_rate: float
    support_rate: float
    median_l1_error: float


def summarize(results: Sequence[TrialResult]) -> List[CellSummary]:
    cells = {}
    for r in results:
        cells.setdefault((r.cell, r.s, r.M, r.sigma), []).append(r)
    out = []
    for (_, s, M, sigma), rs in sorted(cells.items(), key=lambda kv: kv[0][0]):
        good = [r for r in rs if r.ok]
        errs = [r.l1_error for r in good]
        out.append(CellSummary(
            s, M, sigma, len(rs), len(rs) - len(good),
            sum(r.success for r in good),
            sum(r.success for r in good) / len(rs),
            sum(r.support_recovered for r in good) / len(rs),
            float(np.median(errs)) if errs else math.nan,
        ))
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows_csv(rows: Iterable[dict], header: Sequence[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in header])


def write_phase_diagram(results: Sequence[TrialResult], out_dir, fmt: str = "csv") -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = [c.__dict__ for c in summarize(results)]
    if fmt == "json":
        main = out_dir / "phase_diagram.json"
        main.write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n")
        side = out_dir / "phase_summary.json"
        side.write_text(json.dumps(summary, indent=2) + "\n")
        return [main, side]
    main = out_dir / "phase_diagram.csv"
    write_rows_csv((r.to_row() for r in results), PHASE_HEADER, main)
    side = out_dir / "phase_summary.csv"
    write_rows_csv(summary, SUMMARY_HEADER, side)
    return [main, side]


@dataclass(frozen=True)
class ScalingFit:
    axis: str
    slope: float
    half_width: float
    intercept: float
    values: tuple
    medians: tuple

    def contains(self, lo: float, hi: float) -> bool:
        return lo <= self.slope <= hi


_AXES = {"M": "M", "sigma": "sigma", "s": "s"}


def _field(r, key):
    return r[key] if isinstance(r, dict) else getattr(r, key)


def fit_loglog(x, y, axis: str = "x") -> ScalingFit:
    """Ordinary least squares of ``log y`` on ``log x`` with a 95% slope half-width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise FitError(f"need at least 4 grid points on axis {axis}, got {x.size}")
    if np.any(~np.isfinite(y)) or np.any(y <= 0) or np.any(x <= 0):
        raise FitError(f"non-positive or missing errors on axis {axis}; exact recoveries cannot be fitted")
    lx, ly = np.log(x), np.log(y)
    n = lx.size
    xm = lx.mean()
    sxx = float(((lx - xm) ** 2).sum())
    slope = float(((lx - xm) * (ly - ly.mean())).sum() / sxx)
    intercept = float(ly.mean() - slope * xm)
    ssr = float(((ly - intercept - slope * lx) ** 2).sum())
    se = math.sqrt(ssr / (n - 2) / sxx)
    half = float(stats.t.ppf(0.975, n - 2) * se)
    return ScalingFit(axis, slope, half, intercept, tuple(x.tolist()), tuple(y.tolist()))


def fit_error_scaling(results: Iterable, axis: str) -> ScalingFit:
    """Fit the log-log slope of the median l1 error along one grid axis.

    ``results`` holds :class:`TrialResult` objects or dicts with ``M``,
    ``sigma``, ``s`` and ``l1_error``. Failed and noiseless trials are left
    out.
    """
    if axis not in _AXES:
        raise FitError(f"axis must be one of {sorted(_AXES)}")
    key = _AXES[axis]
    groups = {}
    for r in results:
        err = r.get("error") if isinstance(r, dict) else getattr(r, "error", None)
        if err is not None or float(_field(r, "sigma")) == 0.0:
            continue
        groups.setdefault(float(_field(r, key)), []).append(float(_field(r, "l1_error")))
    values = sorted(groups)
    medians = [float(np.median(groups[v])) for v in values]
    return fit_loglog(values, medians, axis)


def write_identification(result: TrialResult, out_dir) -> List[Path]:
    """Solution JSON, metrics JSON, generating map and the observation pairs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "solution.json", out_dir / "metrics.json", out_dir / "map.json",
             out_dir / "observations.csv"]
    save_solution(result.solution, paths[0])
    paths[1].write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    save_trigpoly(result.map, paths[2])
    sys = result.system
    write_observations_csv(ObservationSet(sys.x, sys.y, result.sigma, "run"), paths[3])
    return paths
