"""Orbits of circle maps, invariant-density histograms and observation pairs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .exceptions import DynamicsError, ParameterError
from .trigpoly import TrigPoly

STRATEGIES = ("consecutive", "strided", "uniform_indices")


@dataclass(frozen=True)
class Trajectory:
    """Orbit ``x_{k+1} = f(x_k)`` after discarding ``burn_in`` states."""

    states: np.ndarray
    burn_in: int
    map: TrigPoly
    seed: Optional[int] = None

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class DensityEstimate:
    """Histogram of orbit states with equal-width bins over ``window``."""

    bin_masses: np.ndarray
    sample_count: int
    window: Tuple[float, float] = (0.0, 1.0)

    @property
    def bins(self) -> int:
        return len(self.bin_masses)

    @property
    def edges(self) -> np.ndarray:
        lo, hi = self.window
        return np.linspace(lo, hi, self.bins + 1)

    @property
    def density(self) -> np.ndarray:
        """Density values ``h_b = mass_b / bin_width``."""
        lo, hi = self.window
        return self.bin_masses * (self.bins / (hi - lo))


@dataclass(frozen=True)
class ObservationSet:
    """Pairs ``(x_j, y_j)`` with ``y_j = f(x_j) + eta_j``."""

    x: np.ndarray
    y: np.ndarray
    sigma: float
    strategy: str
    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    seed: Optional[int] = None

    def __len__(self):
        return len(self.x)

    @property
    def pairs(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


def simulate(map: TrigPoly, x0: float, burn_in: int = 1000, length: int = 100_000,
             seed: Optional[int] = None) -> Trajectory:
    """Iterate ``map`` from ``x0`` and keep the states after ``burn_in``.

    ``x0`` is state 0, so ``burn_in=0`` returns it as the first element.
    """
    if not 0.0 <= x0 < 1.0:
        raise ParameterError(f"x0 must lie in [0, 1), got {x0!r}")
    if burn_in < 0 or length < 0:
        raise ParameterError("burn_in and length must be non-negative")
    total = burn_in + length
    out = np.empty(length, dtype=float)
    f = map.real_value
    x = float(x0)
    for k in range(total):
        if k >= burn_in:
            out[k - burn_in] = x
        if k + 1 < total:
            x = f(x)
            if x == 1.0:
                x = 0.0
            elif not 0.0 < x < 1.0:
                raise DynamicsError(k + 1, x)
    return Trajectory(out, burn_in, map, seed)


def estimate_density(traj, bins: int = 64, window: Tuple[float, float] = (0.0, 1.0)) -> DensityEstimate:
    """Histogram the states of ``traj`` (a Trajectory or an array of states).

    States outside ``window`` are ignored; masses are normalised by the
    number of states that fall inside it.
    """
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if bins < 1:
        raise ParameterError("bins must be positive")
    if len(states) < bins:
        raise ParameterError(f"need at least {bins} states for {bins} bins, got {len(states)}")
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ParameterError("window must have positive length")
    inside = (states >= lo) & (states < hi)
    pos = np.floor((states[inside] - lo) * (bins / (hi - lo))).astype(np.int64)
    counts = np.bincount(np.clip(pos, 0, bins - 1), minlength=bins)
    n_in = int(counts.sum())
    masses = counts / n_in if n_in else counts.astype(float)
    return DensityEstimate(masses, n_in, (lo, hi))


def density_lower_bound(est: DensityEstimate) -> float:
    """Smallest histogram density value, an empirical density floor."""
    return float(est.density.min())


def relative_floor(est: DensityEstimate) -> float:
    """Smallest bin mass times the bin count.

    For a window equal to [0, 1) this is :func:`density_lower_bound`; for
    other windows it measures how evenly the orbit fills that window.
    """
    return float(est.bin_masses.min() * est.bins)


def map_range(poly: TrigPoly, grid_points: int = 4096) -> Tuple[float, float]:
    values = poly(np.arange(grid_points) / grid_points).real
    return float(values.min()), float(values.max())


def select_indices(n_states: int, M: int, strategy: str = "consecutive", stride: int = 1,
                   rng=None) -> np.ndarray:
    """Orbit indices ``j_m`` whose successors ``j_m + 1`` exist."""
    if M < 1:
        raise ParameterError("M must be positive")
    last = n_states - 2  # largest usable j
    if strategy == "consecutive":
        stride = 1
        strategy = "strided"
    if strategy == "strided":
        if stride < 1:
            raise ParameterError("stride must be at least 1")
        if (M - 1) * stride > last:
            raise ParameterError(
                f"trajectory of {n_states} states too short for {M} samples at stride {stride}")
        return np.arange(M) * stride
    if strategy == "uniform_indices":
        if M > last + 1:
            raise ParameterError(f"trajectory of {n_states} states too short for {M} distinct samples")
        rng = np.random.default_rng(rng)
        return np.sort(rng.choice(last + 1, size=M, replace=False))
    raise ParameterError(f"unknown sampling strategy {strategy!r}; expected one of {STRATEGIES}")


def sample_observations(traj: Trajectory, M: int, strategy: str = "consecutive", sigma: float = 0.0,
                        seed=None, stride: int = 1) -> ObservationSet:
    """Select ``M`` orbit pairs and add i.i.d. ``N(0, sigma^2)`` noise to the images."""
    if sigma < 0:
        raise ParameterError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    idx = select_indices(len(traj.states), M, strategy, stride, rng)
    x = traj.states[idx].copy()
    y = traj.states[idx + 1].copy()
    if sigma > 0:
        y = y + sigma * rng.standard_normal(M)
    tag = f"strided({stride})" if strategy == "strided" else strategy
    return ObservationSet(x, y, float(sigma), tag, idx, None if seed is None else int(seed))


def _fmt(v) -> str:
    return repr(float(v))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "x"])
        for k, x in enumerate(traj.states):
            w.writerow([traj.burn_in + k, _fmt(x)])


def read_trajectory_csv(path, map: Optional[TrigPoly] = None) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path}: empty trajectory")
    steps = [int(r["step"]) for r in rows]
    states = np.array([float(r["x"]) for r in rows])
    return Trajectory(states, steps[0], map)


def write_observations_csv(obs: ObservationSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(obs.x, obs.y):
            w.writerow([_fmt(x), _fmt(y)])


def read_observations_csv(path, sigma: float = 0.0) -> ObservationSet:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"x", "y"}:
            raise ParameterError(f"{path}: expected header 'x,y'")
        rows = list(reader)
    if not rows:
        raise ParameterError(f"{path}: no observations")
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    if np.any((x < 0) | (x >= 1)):
        raise ParameterError(f"{path}: sample points must lie in [0, 1)")
    return ObservationSet(x, y, float(sigma), "file", np.arange(len(x)))


def write_density_csv(est: DensityEstimate, path) -> None:
    edges = est.edges
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "density"])
        for left, right, h in zip(edges[:-1], edges[1:], est.density):
            w.writerow([_fmt(left), _fmt(right), _fmt(h)])


def read_density_csv(path) -> DensityEstimate:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path}: empty density table")
    left = np.array([float(r["bin_left"]) for r in rows])
    right = np.array([float(r["bin_right"]) for r in rows])
    h = np.array([float(r["density"]) for r in rows])
    masses = h * (right - left)
    return DensityEstimate(masses, 0, (float(left[0]), float(right[-1])))
