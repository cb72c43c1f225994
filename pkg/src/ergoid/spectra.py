"""Numerical checks of restricted-eigenvalue type recovery conditions."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from .exceptions import ParameterError
from .sensing import CovarianceMatrix

CERT_TOL = 1e-9
PSD_CLAMP = 1e-10
_CHUNK = 100_000


def psd_sqrt(V) -> np.ndarray:
    """Hermitian square root through an eigendecomposition.

    Eigenvalues in ``[-1e-10, 0)`` are clamped to zero; anything more negative
    is an error.
    """
    if isinstance(V, CovarianceMatrix):
        V = V.V
    V = np.asarray(V)
    w, U = np.linalg.eigh(V)
    if w[0] < -PSD_CLAMP:
        raise ParameterError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


@dataclass(frozen=True)
class SparseEigenReport:
    s: int
    rho_min: float
    attaining_support: Optional[tuple]
    method: str


@dataclass(frozen=True)
class REEstimate:
    s0: int
    p: float
    kappa_estimate: float
    method: str
    samples_used: int
    certified: bool

    @property
    def violated(self) -> bool:
        return math.isinf(self.kappa_estimate)


def _gram(X) -> np.ndarray:
    X = np.asarray(X)
    return X.conj().T @ X


def sparse_eigenvalue_min(X, s: int, budget: int = 1_000_000) -> SparseEigenReport:
    """Smallest ``s``-sparse eigenvalue of ``X`` by exhaustive support search."""
    A = _gram(X)
    N = A.shape[0]
    if not 1 <= s <= N:
        raise ParameterError(f"s must lie in [1, {N}]")
    count = math.comb(N, s)
    if count > budget:
        raise ParameterError(f"{count} supports exceed the enumeration budget {budget}")
    best = math.inf
    best_supp = None
    combos = itertools.combinations(range(N), s)
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=int)
        if chunk.size == 0:
            break
        subs = A[chunk[:, :, None], chunk[:, None, :]]
        mins = np.linalg.eigvalsh(subs)[:, 0]
        k = int(np.argmin(mins))
        if mins[k] < best:
            best = float(mins[k])
            best_supp = tuple(int(i) for i in chunk[k])
    return SparseEigenReport(s, max(best, 0.0), best_supp, "exhaustive")


def sparse_eigenvalue_lower_bound(X, s: int) -> SparseEigenReport:
    """Gershgorin lower bound, usable when enumeration is too expensive."""
    A = _gram(X)
    off = np.abs(A - np.diag(np.diag(A)))
    off_sorted = -np.sort(-off, axis=1)[:, : max(s - 1, 0)]
    bound = float(np.min(np.diag(A).real - off_sorted.sum(axis=1)))
    return SparseEigenReport(s, max(bound, 0.0), None, "lower_bound")


def re_estimate_monte_carlo(X, s0: int, p: float, num_samples: int = 2000, rng_seed=None,
                            zero_tol: float = 1e-14) -> REEstimate:
    """Sampled estimate of the restricted-eigenvalue parameter ``kappa``.

    Draws random supports ``I`` with ``|I| <= s0`` and random vectors in the
    cone ``||v_{I^c}||_1 <= p ||v_I||_1``; every fourth vector is supported on
    ``I`` only. Returns the largest ``||v_I||_2 / ||X v||_2`` seen, which
    can only underestimate the true parameter, so the result is never
    certified. A vanishing ``||X v||`` reports ``kappa = inf``.
    """
    if num_samples < 1:
        raise ParameterError("num_samples must be at least 1")
    X = np.asarray(X)
    N = X.shape[1]
    if not 0 < s0 < N + 1:
        raise ParameterError(f"s0 must lie in [1, {N}]")
    rng = np.random.default_rng(rng_seed)
    scale = np.linalg.norm(X)
    V = np.zeros((N, num_samples), dtype=complex)
    VI_norm = np.empty(num_samples)
    for j in range(num_samples):
        k = int(rng.integers(1, s0 + 1))
        I = rng.choice(N, size=k, replace=False)
        vI = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        V[I, j] = vI
        VI_norm[j] = np.linalg.norm(vI)
        if j % 4 == 0 or k == N:
            continue
        rest = np.setdiff1d(np.arange(N), I)
        w = rng.standard_normal(rest.size) + 1j * rng.standard_normal(rest.size)
        w *= rng.uniform() * p * np.abs(vI).sum() / np.abs(w).sum()
        V[rest, j] = w
    XV = np.linalg.norm(X @ V, axis=0)
    vnorm = np.linalg.norm(V, axis=0)
    if np.any(XV <= zero_tol * scale * vnorm):
        return REEstimate(s0, p, math.inf, "exhaustive_cone_sampling", num_samples, False)
    kappa = float(np.max(VI_norm / XV))
    return REEstimate(s0, p, kappa, "exhaustive_cone_sampling", num_samples, False)


@dataclass(frozen=True)
class Lemma1Certificate:
    holds: bool
    lambda_min: float
    kappa_bound: float
    xi_h: float


def lemma1_certificate(V, xi_h: float) -> Lemma1Certificate:
    """Certify ``||V^{1/2} v||^2 >= xi_h ||v||^2`` through ``lambda_min(V)``.

    ``kappa_bound = lambda_min^{-1/2}`` bounds the restricted-eigenvalue
    parameter of ``V^{1/2}`` for every support size and cone width.
    """
    M = V.V if isinstance(V, CovarianceMatrix) else np.asarray(V)
    lam = float(np.linalg.eigvalsh(M)[0])
    kappa = 1.0 / math.sqrt(lam) if lam > 0 else math.inf
    return Lemma1Certificate(lam >= xi_h - CERT_TOL, lam, kappa, float(xi_h))


@dataclass(frozen=True)
class Lemma2Certificate:
    holds: bool
    rho_min: float
    s: int
    xi_h: float


def lemma2_certificate(V, xi_h: float, s: int, budget: int = 1_000_000) -> Lemma2Certificate:
    """Check that the smallest ``s``-sparse eigenvalue of ``V^{1/2}`` is at least ``xi_h``."""
    root = psd_sqrt(V)
    rep = sparse_eigenvalue_min(root, s, budget)
    return Lemma2Certificate(rep.rho_min >= xi_h - CERT_TOL, rep.rho_min, s, float(xi_h))


def sample_size_bound(s: int, N: int, xi_h: float, C2: float = 1.0) -> int:
    """Smallest ``M`` with ``M >= t log t``, ``t = C2 s log N / xi_h^{3/2}``.

    For ``log t <= 1`` the bound degenerates and ``ceil(t)`` is returned.
    """
    if N < 2 or not xi_h > 0 or not C2 > 0:
        raise ParameterError("sample_size_bound needs N >= 2, xi_h > 0 and C2 > 0")
    t = C2 * s * math.log(N) / xi_h ** 1.5
    lt = math.log(t)
    if lt <= 1.0:
        return int(math.ceil(t))
    return int(math.ceil(t * lt))


def corollary1_ell(s0: float, p: float, xi_h: float, delta: float) -> float:
    """``s0 + s0 * 16 (3p)^2 (3p + 1) / (sqrt(xi_h) delta^2)``."""
    if not 0 < delta <= 1 or not p > 0 or not s0 > 0 or not xi_h > 0:
        raise ParameterError("corollary1_ell needs 0 < delta <= 1, p > 0, s0 > 0 and xi_h > 0")
    return s0 + s0 * 16 * (3 * p) ** 2 * (3 * p + 1) / (math.sqrt(xi_h) * delta ** 2)


@dataclass
class CertificationReport:
    N: int
    xi_h: float
    lambda_min: float
    kappa_bound: float
    lemma1_holds: bool
    rho_min: Dict[int, float] = field(default_factory=dict)
    lemma2_holds: Dict[int, bool] = field(default_factory=dict)
    kappa_estimates: Dict[str, float] = field(default_factory=dict)
    sample_size_bound: Optional[int] = None
    corollary1_ell: Optional[float] = None
    ell_feasible: Optional[bool] = None
    parameters: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.lemma1_holds and all(self.lemma2_holds.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho_min"] = {str(k): v for k, v in self.rho_min.items()}
        d["lemma2_holds"] = {str(k): v for k, v in self.lemma2_holds.items()}
        d["passed"] = self.passed
        for key in ("kappa_bound",):
            if math.isinf(d[key]):
                d[key] = None
        return d


def certify(V, xi_h: float, sparsities: Sequence[int] = (1, 2, 3), s: int = 3, C2: float = 1.0,
            s0: int = 3, p: float = 3.0, delta: float = 0.5, re_samples: int = 0, rng_seed=0,
            budget: int = 1_000_000) -> CertificationReport:
    """Run the covariance-level checks and collect them into one report.

    ``xi_h`` is the density floor to certify against. The sample-size and
    ``ell`` entries are filled only when ``xi_h > 0``.
    """
    Vm = V.V if isinstance(V, CovarianceMatrix) else np.asarray(V)
    N = Vm.shape[0]
    l1 = lemma1_certificate(Vm, xi_h)
    rep = CertificationReport(N=N, xi_h=float(xi_h), lambda_min=l1.lambda_min,
                              kappa_bound=l1.kappa_bound, lemma1_holds=l1.holds,
                              parameters={"s": s, "C2": C2, "s0": s0, "p": p, "delta": delta})
    for k in sparsities:
        if k > N:
            continue
        if math.comb(N, k) > budget:
            root = psd_sqrt(Vm)
            est = sparse_eigenvalue_lower_bound(root, k)
            rep.rho_min[k] = est.rho_min
            rep.lemma2_holds[k] = est.rho_min >= xi_h - CERT_TOL
            continue
        c = lemma2_certificate(Vm, xi_h, k, budget)
        rep.rho_min[k] = c.rho_min
        rep.lemma2_holds[k] = c.holds
    if re_samples:
        est = re_estimate_monte_carlo(psd_sqrt(Vm), min(s0, N), p, re_samples, rng_seed)
        rep.kappa_estimates["V_sqrt_monte_carlo"] = est.kappa_estimate
    if xi_h > 0 and N >= 2:
        rep.sample_size_bound = sample_size_bound(s, N, xi_h, C2)
        rep.corollary1_ell = corollary1_ell(s0, p, xi_h, delta)
        rep.ell_feasible = rep.corollary1_ell <= N
    return rep


def save_report(report: CertificationReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
