"""Sparse trigonometric polynomials on the circle [0, 1).

A polynomial is stored sparsely as ``{n: a_n}`` over the symmetric frequency
set ``{-N_max, ..., N_max}`` and evaluates to ``sum_n a_n exp(2 pi i n x)``.
Real-valued polynomials (the ones that define circle maps) satisfy
``a_{-n} = conj(a_n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Union

import numpy as np

from .exceptions import ParameterError

TWO_PI = 2.0 * math.pi
HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class FrequencySet:
    """Consecutive frequencies ``-max_freq .. max_freq`` in ascending order."""

    max_freq: int

    def __post_init__(self):
        if int(self.max_freq) != self.max_freq or self.max_freq < 1:
            raise ParameterError(f"max_freq must be a positive integer, got {self.max_freq!r}")
        object.__setattr__(self, "max_freq", int(self.max_freq))

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.max_freq, self.max_freq + 1)

    @property
    def size(self) -> int:
        return 2 * self.max_freq + 1

    def position(self, n: int) -> int:
        """Column index of frequency ``n``."""
        if abs(n) > self.max_freq:
            raise ParameterError(f"frequency {n} outside [-{self.max_freq}, {self.max_freq}]")
        return int(n) + self.max_freq

    def __len__(self):
        return self.size

    def __iter__(self) -> Iterator[int]:
        return iter(range(-self.max_freq, self.max_freq + 1))

    def __contains__(self, n):
        return abs(n) <= self.max_freq


def as_frequency_set(freqs) -> FrequencySet:
    if isinstance(freqs, FrequencySet):
        return freqs
    return FrequencySet(int(freqs))


@dataclass(frozen=True)
class TrigPoly:
    """Immutable sparse trigonometric polynomial.

    ``coeffs`` maps frequency to coefficient; zero coefficients are dropped.
    When ``real_valued`` is set the coefficients must be Hermitian symmetric.
    """

    max_freq: int
    coeffs: Mapping[int, complex] = field(default_factory=dict)
    real_valued: bool = False

    def __post_init__(self):
        freqs = as_frequency_set(self.max_freq)
        clean = {}
        for n, c in self.coeffs.items():
            n = int(n)
            if n not in freqs:
                raise ParameterError(f"frequency {n} outside [-{freqs.max_freq}, {freqs.max_freq}]")
            c = complex(c)
            if c != 0:
                clean[n] = c
        clean = dict(sorted(clean.items()))
        object.__setattr__(self, "max_freq", freqs.max_freq)
        object.__setattr__(self, "coeffs", clean)
        if self.real_valued and not is_hermitian(clean):
            raise ParameterError("coefficients are not Hermitian symmetric")
        w = np.array([TWO_PI * n for n in clean], dtype=float)
        re = np.array([c.real for c in clean.values()], dtype=float)
        im = np.array([c.imag for c in clean.values()], dtype=float)
        object.__setattr__(self, "_terms", (w, re, im))
        object.__setattr__(self, "_scalar_terms", tuple(zip(w.tolist(), re.tolist(), im.tolist())))

    @property
    def freqs(self) -> FrequencySet:
        return FrequencySet(self.max_freq)

    @property
    def sparsity(self) -> int:
        return len(self.coeffs)

    @property
    def support(self) -> tuple:
        return tuple(self.coeffs)

    def coeff(self, n: int) -> complex:
        return self.coeffs.get(int(n), 0j)

    def to_dense(self, freqs=None) -> np.ndarray:
        """Coefficient vector in ascending frequency order."""
        freqs = self.freqs if freqs is None else as_frequency_set(freqs)
        if freqs.max_freq < self.max_freq and any(abs(n) > freqs.max_freq for n in self.coeffs):
            raise ParameterError("frequency set too small for this polynomial")
        out = np.zeros(freqs.size, dtype=complex)
        for n, c in self.coeffs.items():
            out[n + freqs.max_freq] = c
        return out

    @classmethod
    def from_dense(cls, vector, freqs=None, real_valued=False) -> "TrigPoly":
        vector = np.asarray(vector, dtype=complex).ravel()
        if freqs is None:
            if vector.size % 2 != 1:
                raise ParameterError("dense coefficient vector must have odd length")
            freqs = FrequencySet(vector.size // 2)
        freqs = as_frequency_set(freqs)
        if vector.size != freqs.size:
            raise ParameterError(f"expected {freqs.size} coefficients, got {vector.size}")
        coeffs = {int(n): complex(c) for n, c in zip(freqs.indices, vector) if c != 0}
        return cls(freqs.max_freq, coeffs, real_valued)

    def __call__(self, x):
        return evaluate(self, x)

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        m = max(self.max_freq, other.max_freq)
        keys = set(self.coeffs) | set(other.coeffs)
        return TrigPoly(m, {n: self.coeff(n) - other.coeff(n) for n in keys})

    def real_value(self, x: float) -> float:
        """Real part of the polynomial at a scalar point.

        Uses the same operation order as :func:`evaluate` so both agree
        bit for bit.
        """
        acc = 0.0
        for w, re, im in self._scalar_terms:
            th = w * x
            acc = acc + (re * math.cos(th) - im * math.sin(th))
        return acc


def is_hermitian(coeffs: Mapping[int, complex], rtol: float = HERMITIAN_RTOL) -> bool:
    if isinstance(coeffs, TrigPoly):
        coeffs = coeffs.coeffs
    scale = max((abs(c) for c in coeffs.values()), default=0.0)
    tol = rtol * scale
    for n, c in coeffs.items():
        partner = coeffs.get(-n, 0j)
        if abs(c - partner.conjugate()) > tol:
            return False
    return True


def evaluate(poly: TrigPoly, x):
    """Value of ``sum_n a_n exp(2 pi i n x)`` at a point or an array of points."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    w, re, im = poly._terms
    re_acc = np.zeros_like(x)
    im_acc = np.zeros_like(x)
    for k in range(w.size):
        th = w[k] * x
        c = np.cos(th)
        s = np.sin(th)
        re_acc = re_acc + (re[k] * c - im[k] * s)
        im_acc = im_acc + (re[k] * s + im[k] * c)
    out = re_acc + 1j * im_acc
    return complex(out) if scalar else out


def hermitian_symmetrize(coeffs):
    """Average a coefficient set with its conjugate reflection.

    Accepts a :class:`TrigPoly` (returned flagged real-valued) or a plain
    mapping ``{n: a_n}`` (returned as a dict).
    """
    poly = coeffs if isinstance(coeffs, TrigPoly) else None
    src = poly.coeffs if poly is not None else {int(n): complex(c) for n, c in coeffs.items()}
    keys = set(src) | {-n for n in src}
    out = {}
    for n in sorted(keys):
        b = (src.get(n, 0j) + src.get(-n, 0j).conjugate()) / 2
        if b != 0:
            out[n] = b
    if poly is not None:
        return TrigPoly(poly.max_freq, out, real_valued=True)
    return out


def hermitian_symmetrize_dense(vector: np.ndarray) -> np.ndarray:
    """Dense counterpart for coefficient vectors in ascending frequency order."""
    v = np.asarray(vector, dtype=complex)
    return (v + np.conj(v[::-1])) / 2


def wiener_norm(poly) -> float:
    """Wiener-algebra norm, the sum of coefficient moduli.

    Summed with ``math.fsum`` so the result does not depend on the order or
    on interleaved zeros.
    """
    if isinstance(poly, TrigPoly):
        values = poly.coeffs.values()
    elif isinstance(poly, Mapping):
        values = poly.values()
    else:
        values = np.asarray(poly, dtype=complex).ravel()
    return math.fsum(abs(complex(c)) for c in values)


@dataclass(frozen=True)
class CircleMapVerdict:
    valid: bool
    x: Union[float, None] = None
    value: Union[float, None] = None
    analytic_bound: float = 0.0
    analytic_ok: bool = False

    def __bool__(self):
        return self.valid


def analytic_range_bound(poly: TrigPoly) -> float:
    """``|a_0 - 1/2| + sum_{n != 0} |a_n|``; below 1/2 forces the range into (0, 1)."""
    rest = math.fsum(abs(c) for n, c in poly.coeffs.items() if n != 0)
    return abs(poly.coeff(0) - 0.5) + rest


def validate_circle_map(poly: TrigPoly, grid_points: int = 4096) -> CircleMapVerdict:
    """Check ``0 < f(x) < 1`` on an equispaced grid.

    The grid check decides validity. The triangle-inequality bound is
    recorded alongside as a sufficient condition.
    """
    if grid_points < 1:
        raise ParameterError("grid_points must be positive")
    if not is_hermitian(poly.coeffs):
        raise ParameterError("circle-map validation needs a Hermitian-symmetric polynomial")
    bound = analytic_range_bound(poly)
    grid = np.arange(grid_points) / grid_points
    values = evaluate(poly, grid).real
    bad = np.flatnonzero(~((values > 0.0) & (values < 1.0)))
    if bad.size:
        k = int(bad[0])
        return CircleMapVerdict(False, float(grid[k]), float(values[k]), bound, bound < 0.5)
    return CircleMapVerdict(True, None, None, bound, bound < 0.5)


def random_sparse_map(s: int, freqs, dc_value: float = 0.5, amplitude_budget: float = 0.3,
                      seed=None) -> TrigPoly:
    """Draw a random real circle map with exactly ``s`` nonzero coefficients.

    The DC term is always ``dc_value`` and the remaining ``(s - 1) / 2``
    conjugate pairs sit on distinct random frequencies with random phases and
    moduli summing to ``amplitude_budget``.
    """
    freqs = as_frequency_set(freqs)
    if int(s) != s or s < 1:
        raise ParameterError(f"sparsity must be a positive integer, got {s!r}")
    if s % 2 == 0:
        raise ParameterError(
            f"sparsity {s} is infeasible: the DC term costs 1 and each conjugate pair costs 2")
    pairs = (s - 1) // 2
    if pairs > freqs.max_freq:
        raise ParameterError(f"sparsity {s} needs {pairs} positive frequencies, only {freqs.max_freq} available")
    if not 0.0 < dc_value < 1.0:
        raise ParameterError("dc_value must lie in (0, 1)")
    if not 0.0 <= amplitude_budget < min(dc_value, 1.0 - dc_value):
        raise ParameterError(
            f"amplitude_budget must lie in [0, {min(dc_value, 1.0 - dc_value)}), got {amplitude_budget}")
    if pairs and amplitude_budget == 0.0:
        raise ParameterError("a zero amplitude budget only admits the constant map (s = 1)")
    rng = np.random.default_rng(seed)
    coeffs = {0: complex(dc_value)}
    if pairs:
        ks = np.sort(rng.choice(np.arange(1, freqs.max_freq + 1), size=pairs, replace=False))
        moduli = rng.dirichlet(np.ones(pairs)) * (amplitude_budget / 2.0)
        phases = rng.uniform(0.0, TWO_PI, size=pairs)
        for k, r, ph in zip(ks.tolist(), moduli.tolist(), phases.tolist()):
            c = complex(r * math.cos(ph), r * math.sin(ph))
            coeffs[k] = c
            coeffs[-k] = c.conjugate()
    return TrigPoly(freqs.max_freq, coeffs, real_valued=True)


def trigpoly_to_dict(poly: TrigPoly) -> dict:
    return {
        "max_freq": poly.max_freq,
        "real_valued": poly.real_valued,
        "coeffs": [[n, c.real, c.imag] for n, c in poly.coeffs.items()],
    }


def trigpoly_from_dict(data: Mapping, real_valued=None) -> TrigPoly:
    try:
        max_freq = int(data["max_freq"])
        rows = data["coeffs"]
        coeffs = {}
        for row in rows:
            n, re, im = row
            if int(n) in coeffs:
                raise ParameterError(f"duplicate frequency {n}")
            coeffs[int(n)] = complex(float(re), float(im))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"malformed polynomial data: {exc}") from exc
    flag = bool(data.get("real_valued", False)) if real_valued is None else bool(real_valued)
    return TrigPoly(max_freq, coeffs, real_valued=flag)


def save_trigpoly(poly: TrigPoly, path) -> None:
    Path(path).write_text(json.dumps(trigpoly_to_dict(poly), indent=2) + "\n")


def load_trigpoly(path, real_valued=None) -> TrigPoly:
    return trigpoly_from_dict(json.loads(Path(path).read_text()), real_valued=real_valued)
