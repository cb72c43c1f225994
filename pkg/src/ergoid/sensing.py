"""Fourier measurement systems and covariance matrices of sampling densities."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np
import scipy.linalg

from .dynamics import DensityEstimate, ObservationSet
from .exceptions import ParameterError
from .trigpoly import TWO_PI, FrequencySet, TrigPoly, as_frequency_set

NORMALIZATION_TOL = 1e-9
_BLOCK_ROWS = 4096


def fourier_matrix(x, freqs) -> np.ndarray:
    """Rows ``[exp(2 pi i n x_m)]_n`` in ascending frequency order."""
    freqs = as_frequency_set(freqs)
    x = np.asarray(x, dtype=float).ravel()
    return np.exp(1j * TWO_PI * np.outer(x, freqs.indices))


@dataclass(frozen=True, eq=False)
class MeasurementSystem:
    """Linear model ``y = G a`` with ``G[m, n] = exp(2 pi i n x_m)``.

    With ``implicit=True`` the matrix is never stored; columns and products
    are generated from the sample points on demand.
    """

    x: np.ndarray
    y: np.ndarray
    freqs: FrequencySet
    implicit: bool = False
    _G: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return len(self.x)

    @property
    def N(self) -> int:
        return self.freqs.size

    @property
    def G(self) -> np.ndarray:
        if self._G is not None:
            return self._G
        return fourier_matrix(self.x, self.freqs)

    def column(self, pos: int) -> np.ndarray:
        if self._G is not None:
            return self._G[:, pos]
        n = pos - self.freqs.max_freq
        return np.exp(1j * (TWO_PI * n) * self.x)

    def matvec(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if self._G is not None:
            return self._G @ a
        out = np.empty(self.M, dtype=complex)
        for start in range(0, self.M, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, self.M)
            out[start:stop] = fourier_matrix(self.x[start:stop], self.freqs) @ a
        return out

    def rmatvec(self, r) -> np.ndarray:
        """``G^* r``."""
        r = np.asarray(r, dtype=complex)
        if self._G is not None:
            return self._G.conj().T @ r
        out = np.zeros(self.N, dtype=complex)
        for start in range(0, self.M, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, self.M)
            out += fourier_matrix(self.x[start:stop], self.freqs).conj().T @ r[start:stop]
        return out


def build_measurement(obs, freqs, implicit: bool = False) -> MeasurementSystem:
    """Assemble the measurement system from observation pairs.

    ``obs`` is an :class:`ObservationSet` or an ``(x, y)`` tuple of arrays.
    """
    if isinstance(obs, ObservationSet):
        x, y = obs.x, obs.y
    else:
        x, y = obs
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y).ravel()
    if x.size == 0:
        raise ParameterError("observation set is empty")
    if x.shape != y.shape:
        raise ParameterError(f"{x.size} sample points but {y.size} observations")
    freqs = as_frequency_set(freqs)
    G = None if implicit else fourier_matrix(x, freqs)
    return MeasurementSystem(x, y, freqs, implicit, G)


def empirical_gram(sys: MeasurementSystem) -> np.ndarray:
    """Normalised Gram matrix ``G^* G / M``."""
    if sys._G is not None:
        G = sys._G
        return (G.conj().T @ G) / sys.M
    out = np.zeros((sys.N, sys.N), dtype=complex)
    for start in range(0, sys.M, _BLOCK_ROWS):
        B = fourier_matrix(sys.x[start:start + _BLOCK_ROWS], sys.freqs)
        out += B.conj().T @ B
    return out / sys.M


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Hermitian Toeplitz matrix ``V[j, k] = <Phi_j, Phi_k>_nu``."""

    V: np.ndarray
    freqs: FrequencySet
    source: str

    @property
    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.V)[0])


def histogram_fourier_coefficients(est: DensityEstimate, max_lag: int) -> np.ndarray:
    """``h_hat(m) = int exp(2 pi i m x) h(x) dx`` for ``m = 0..max_lag``.

    Each bin is integrated exactly against the piecewise-constant density.
    """
    edges = est.edges
    h = est.density
    m = np.arange(1, max_lag + 1)
    right = np.exp(1j * TWO_PI * np.outer(m, edges[1:]))
    left = np.exp(1j * TWO_PI * np.outer(m, edges[:-1]))
    out = np.empty(max_lag + 1, dtype=complex)
    out[0] = est.bin_masses.sum()
    out[1:] = ((right - left) @ h) / (1j * TWO_PI * m)
    return out


def _coefficients_from_trigpoly(poly: TrigPoly, max_lag: int) -> np.ndarray:
    # h(x) = sum_n c_n e^{2 pi i n x}  =>  h_hat(m) = c_{-m}
    values = poly(np.arange(4096) / 4096).real
    if values.min() < -1e-12:
        raise ParameterError("density takes negative values")
    return np.array([poly.coeff(-m) for m in range(max_lag + 1)], dtype=complex)


def covariance_from_density(h: Union[str, DensityEstimate, TrigPoly, Mapping], freqs) -> CovarianceMatrix:
    """Covariance matrix of the Fourier basis under a sampling density.

    ``h`` may be ``"uniform"``, a :class:`DensityEstimate`, a density given as
    a real :class:`TrigPoly`, or a mapping ``{m: h_hat(m)}`` of Fourier
    coefficients (missing lags are zero; ``h_hat(-m)`` defaults to the
    conjugate of ``h_hat(m)``).
    """
    freqs = as_frequency_set(freqs)
    max_lag = freqs.size - 1
    if isinstance(h, str):
        if h != "uniform":
            raise ParameterError(f"unknown density {h!r}")
        return CovarianceMatrix(np.eye(freqs.size, dtype=complex), freqs, "uniform")
    if isinstance(h, DensityEstimate):
        if np.any(h.bin_masses < 0):
            raise ParameterError("histogram has negative mass")
        total = h.bin_masses.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"histogram mass {total} is not normalised")
        coeffs = histogram_fourier_coefficients(h, max_lag)
        source = "histogram"
    elif isinstance(h, TrigPoly):
        if abs(h.coeff(0) - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"density integrates to {h.coeff(0)}, not 1")
        coeffs = _coefficients_from_trigpoly(h, max_lag)
        source = "exact_density"
    elif isinstance(h, Mapping):
        full = {int(m): complex(v) for m, v in h.items()}
        for m, v in list(full.items()):
            full.setdefault(-m, v.conjugate())
        poly = TrigPoly(max(max(abs(m) for m in full), 1), {-m: v for m, v in full.items()})
        if abs(full.get(0, 0) - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"density integrates to {full.get(0, 0)}, not 1")
        coeffs = _coefficients_from_trigpoly(poly, max_lag)
        source = "exact_density"
    else:
        raise ParameterError(f"unsupported density specification {type(h).__name__}")
    coeffs = coeffs / coeffs[0].real
    coeffs[0] = 1.0
    V = scipy.linalg.toeplitz(coeffs, coeffs.conj())
    return CovarianceMatrix(V, freqs, source)


def write_matrix_csv(sys_or_matrix, path, freqs=None) -> None:
    """Diagnostics dump: a ``M,N,freq_min,freq_max`` line, then interleaved re/im rows."""
    if isinstance(sys_or_matrix, MeasurementSystem):
        G, freqs = sys_or_matrix.G, sys_or_matrix.freqs
    else:
        G = np.asarray(sys_or_matrix, dtype=complex)
        freqs = as_frequency_set(freqs if freqs is not None else (G.shape[1] - 1) // 2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([G.shape[0], G.shape[1], -freqs.max_freq, freqs.max_freq])
        for row in G:
            inter = np.empty(2 * row.size)
            inter[0::2] = row.real
            inter[1::2] = row.imag
            w.writerow([repr(float(v)) for v in inter])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    M, N, _, _ = (int(v) for v in rows[0])
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    if data.shape != (M, 2 * N):
        raise ParameterError(f"{path}: expected {M}x{2 * N} values, got {data.shape}")
    return data[:, 0::2] + 1j * data[:, 1::2]
