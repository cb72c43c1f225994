"""Complex Lasso by cyclic coordinate descent, with brute-force oracles.

The objective is ``(1/M) ||y - G a||^2 + 2 lam ||a||_1``. Every column of a
Fourier measurement matrix has squared norm ``M``, so the exact coordinate
minimiser is a complex soft threshold at ``lam``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .exceptions import NumericalRankError, ParameterError
from .sensing import MeasurementSystem, empirical_gram
from .trigpoly import FrequencySet, TrigPoly, hermitian_symmetrize_dense


@dataclass(frozen=True)
class LassoConfig:
    lam: float
    max_iterations: int = 100_000
    tolerance: float = 1e-10
    symmetrize_output: bool = False
    # geometric continuation from lam_max down to lam; 0 disables it
    path_points_per_decade: int = 5
    record_history: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ParameterError(f"lambda must be non-negative, got {self.lam!r}")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be at least 1")
        if self.path_points_per_decade < 0:
            raise ParameterError("path_points_per_decade must be non-negative")


@dataclass(frozen=True, eq=False)
class LassoSolution:
    coeffs: np.ndarray
    objective_value: float
    kkt_residual: float
    iterations_used: int
    converged: bool
    lam: float
    freqs: FrequencySet
    # one list of per-sweep objective values for each continuation stage
    objective_history: List[List[float]] = field(default_factory=list)
    stage_lambdas: List[float] = field(default_factory=list)

    def support(self, threshold: float = 0.0) -> np.ndarray:
        """Column positions with ``|a_n| > threshold``."""
        return np.flatnonzero(np.abs(self.coeffs) > threshold)

    def to_trigpoly(self, real_valued: bool = False) -> TrigPoly:
        return TrigPoly.from_dense(self.coeffs, self.freqs, real_valued=real_valued)


def soft_threshold_complex(c, t):
    """Proximal map of ``t |.|``: shrink the modulus of ``c`` by ``t``."""
    if t < 0:
        raise ParameterError("threshold must be non-negative")
    if np.ndim(c) == 0:
        c = complex(c)
        mag = abs(c)
        return 0j if mag <= t else c * (1 - t / mag)
    c = np.asarray(c, dtype=complex)
    mag = np.abs(c)
    scale = np.where(mag > t, 1 - t / np.where(mag > 0, mag, 1.0), 0.0)
    return c * scale


def lambda_rule(sigma: float, N: int, M: int, A: float = 4.0) -> float:
    """Regularisation level ``A sigma sqrt(log N / M)``."""
    if N < 2 or M < 1 or sigma < 0:
        raise ParameterError("lambda_rule needs N >= 2, M >= 1 and sigma >= 0")
    return A * sigma * math.sqrt(math.log(N) / M)


def objective(sys: MeasurementSystem, coeffs, lam: float) -> float:
    r = sys.y - sys.matvec(coeffs)
    return float(np.vdot(r, r).real) / sys.M + 2 * lam * math.fsum(np.abs(coeffs))


def _kkt_from_correlation(c: np.ndarray, a: np.ndarray, lam: float) -> float:
    mag = np.abs(a)
    on = mag > 0
    off_viol = np.maximum(np.abs(c[~on]) - lam, 0.0)
    on_viol = np.abs(c[on] - lam * a[on] / mag[on])
    return float(max(off_viol.max(initial=0.0), on_viol.max(initial=0.0)))


def kkt_residual(sys: MeasurementSystem, coeffs, lam: float) -> float:
    """Largest violation of the Lasso subgradient optimality conditions."""
    a = np.asarray(coeffs, dtype=complex)
    c = sys.rmatvec(sys.y - sys.matvec(a)) / sys.M
    return _kkt_from_correlation(c, a, lam)


class _GramKernel:
    """Coordinate updates on the correlation vector ``c = G^*(y - Ga)/M``."""

    def __init__(self, sys):
        self.Q = np.asfortranarray(empirical_gram(sys))
        self.b = sys.rmatvec(sys.y) / sys.M

    def refresh(self, a):
        return self.b - self.Q @ a

    def sweep(self, a, c, lam, idx):
        Q = self.Q
        dmax = 0.0
        for n in idx:
            old = a[n]
            z = old + c[n]
            mag = abs(z)
            new = 0j if mag <= lam else z * (1 - lam / mag)
            d = new - old
            if d != 0:
                a[n] = new
                c -= Q[:, n] * d
                ad = abs(d)
                if ad > dmax:
                    dmax = ad
        return dmax


class _ResidualKernel:
    """Coordinate updates on the residual ``r = y - G a`` with generated columns."""

    def __init__(self, sys):
        self.sys = sys
        self.b = sys.rmatvec(sys.y) / sys.M
        self.r = None

    def refresh(self, a):
        self.r = self.sys.y - self.sys.matvec(a)
        return self.sys.rmatvec(self.r) / self.sys.M

    def sweep(self, a, c, lam, idx):
        sys, r, M = self.sys, self.r, self.sys.M
        dmax = 0.0
        for n in idx:
            g = sys.column(n)
            old = a[n]
            z = old + np.vdot(g, r) / M
            mag = abs(z)
            new = 0j if mag <= lam else z * (1 - lam / mag)
            d = new - old
            if d != 0:
                a[n] = new
                r -= g * d
                ad = abs(d)
                if ad > dmax:
                    dmax = ad
        c[:] = sys.rmatvec(r) / M
        return dmax


def _coordinate_descent(kernel, sys, a, lam, tol, budget, history):
    """Full sweeps alternating with sweeps over the current active set."""
    N = a.size
    everything = range(N)
    sweeps = 0
    while sweeps < budget:
        c = kernel.refresh(a)
        dmax = kernel.sweep(a, c, lam, everything)
        sweeps += 1
        if history is not None:
            history.append(objective(sys, a, lam))
        if dmax <= tol:
            c = kernel.refresh(a)
            if _kkt_from_correlation(c, a, lam) <= 10 * tol:
                return sweeps, True
        active = np.flatnonzero(a).tolist()
        while active and sweeps < budget:
            d = kernel.sweep(a, c, lam, active)
            sweeps += 1
            if history is not None:
                history.append(objective(sys, a, lam))
            if d <= tol:
                break
    return sweeps, False


def _stage_lambdas(lam, lam_max, per_decade):
    if per_decade == 0 or lam >= lam_max:
        return [lam]
    floor = lam if lam > 0 else lam_max * 1e-10
    k = max(1, int(math.ceil(per_decade * math.log10(lam_max / floor))))
    stages = np.geomspace(lam_max, floor, k + 1)[1:].tolist()
    stages[-1] = floor
    if lam == 0:
        stages.append(0.0)
    return stages


def solve_lasso(sys: MeasurementSystem, cfg: LassoConfig, init=None) -> LassoSolution:
    """Minimise ``(1/M)||y - G a||^2 + 2 lam ||a||_1`` by cyclic coordinate descent.

    Without ``init`` the solve follows a geometric continuation path from
    ``lam_max = max_n |g_n^* y| / M`` (where zero is optimal) down to
    ``cfg.lam``, warm-starting each stage. ``max_iterations`` bounds the
    total number of sweeps across stages. Non-convergence is reported via
    ``converged=False``.
    """
    kernel = _ResidualKernel(sys) if sys.implicit else _GramKernel(sys)
    N = sys.N
    lam_max = float(np.abs(kernel.b).max())
    if init is None:
        a = np.zeros(N, dtype=complex)
        stages = _stage_lambdas(cfg.lam, lam_max, cfg.path_points_per_decade)
    else:
        a = np.array(init, dtype=complex).ravel()
        if a.size != N:
            raise ParameterError(f"warm start has {a.size} entries, expected {N}")
        stages = [cfg.lam]
    histories = []
    budget = cfg.max_iterations
    used = 0
    converged = False
    for stage_lam in stages:
        history = [] if cfg.record_history else None
        n, converged = _coordinate_descent(kernel, sys, a, stage_lam, cfg.tolerance,
                                           budget - used, history)
        used += n
        if history is not None:
            histories.append(history)
        if not converged:
            break
    if cfg.symmetrize_output:
        a = hermitian_symmetrize_dense(a)
    return LassoSolution(
        coeffs=a,
        objective_value=objective(sys, a, cfg.lam),
        kkt_residual=kkt_residual(sys, a, cfg.lam),
        iterations_used=used,
        converged=converged,
        lam=cfg.lam,
        freqs=sys.freqs,
        objective_history=histories,
        stage_lambdas=stages,
    )


def debias_on_support(sys: MeasurementSystem, support: Sequence[int], rcond: float = 1e-10) -> np.ndarray:
    """Least-squares refit restricted to the column positions in ``support``.

    Returns a full-length coefficient vector that is zero off the support.
    """
    support = np.asarray(sorted(set(int(s) for s in support)), dtype=int)
    out = np.zeros(sys.N, dtype=complex)
    if support.size == 0:
        return out
    if support.size > sys.M:
        raise ParameterError(f"support of size {support.size} exceeds {sys.M} samples")
    if support.min() < 0 or support.max() >= sys.N:
        raise ParameterError("support position out of range")
    GS = np.column_stack([sys.column(int(p)) for p in support])
    sv = np.linalg.svd(GS, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise NumericalRankError(
            f"restricted matrix on {support.tolist()} has condition number {sv[0] / max(sv[-1], 1e-300):.3g}")
    coef, *_ = np.linalg.lstsq(GS, sys.y.astype(complex), rcond=None)
    out[support] = coef
    return out


@dataclass(frozen=True, eq=False)
class L0Result:
    coeffs: np.ndarray
    support: tuple
    residual_norm: float


def l0_oracle(sys: MeasurementSystem, s: int, budget: int = 1_000_000, rtol: float = 1e-9) -> L0Result:
    """Best fit over all supports of size at most ``s``.

    Supports are visited by increasing size, lexicographically within a size;
    a later support only wins if it lowers the residual by more than
    ``rtol * ||y||``, so ties go to the smallest, lexicographically first
    support.
    """
    N = sys.N
    total = sum(math.comb(N, k) for k in range(s + 1))
    if total > budget:
        raise ParameterError(f"{total} supports exceed the enumeration budget {budget}")
    y = sys.y.astype(complex)
    tie = rtol * max(float(np.linalg.norm(y)), np.finfo(float).tiny)
    best = L0Result(np.zeros(N, dtype=complex), (), float(np.linalg.norm(y)))
    for k in range(1, s + 1):
        for supp in itertools.combinations(range(N), k):
            try:
                a = debias_on_support(sys, supp)
            except (NumericalRankError, ParameterError):
                continue
            res = float(np.linalg.norm(y - sys.matvec(a)))
            if res < best.residual_norm - tie:
                best = L0Result(a, supp, res)
    return best


def solution_to_dict(sol: LassoSolution) -> dict:
    return {
        "lambda": sol.lam,
        "converged": sol.converged,
        "kkt_residual": sol.kkt_residual,
        "objective_value": sol.objective_value,
        "iterations_used": sol.iterations_used,
        "max_freq": sol.freqs.max_freq,
        "coeffs": [[int(n), float(c.real), float(c.imag)]
                   for n, c in zip(sol.freqs.indices, sol.coeffs) if c != 0],
    }


def save_solution(sol: LassoSolution, path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=2) + "\n")
