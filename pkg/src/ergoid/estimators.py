"""scikit-learn compatible wrappers around the identification pipeline.

``SparseCircleMapRegressor`` fits a sparse trigonometric polynomial to
observation pairs ``(x_j, y_j)`` and predicts map values. It composes with
pipelines, ``clone`` and grid search like any other regressor.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .dynamics import density_lower_bound, estimate_density
from .lasso import LassoConfig, lambda_rule, solve_lasso
from .sensing import build_measurement, covariance_from_density, fourier_matrix
from .trigpoly import FrequencySet, TrigPoly


def check_points(X) -> np.ndarray:
    """Validate circle sample points given as shape ``(M,)`` or ``(M, 1)``."""
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature (points on the circle), got {X.shape[1]}")
        X = X[:, 0]
    if np.any((X < 0.0) | (X >= 1.0)):
        raise ValueError("sample points must lie in [0, 1)")
    return X


def check_targets(y, n: int) -> np.ndarray:
    y = check_array(y, ensure_2d=False, dtype=np.float64)
    if y.ndim != 1:
        y = y.ravel()
    check_consistent_length(np.empty(n), y)
    return y


class FourierFeatures(TransformerMixin, BaseEstimator):
    """Map circle points to the complex features ``exp(2 pi i n x)``, ``|n| <= nmax``."""

    def __init__(self, nmax=15):
        self.nmax = nmax

    def fit(self, X, y=None):
        check_points(X)
        self.freqs_ = FrequencySet(self.nmax)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "freqs_")
        return fourier_matrix(check_points(X), self.freqs_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "freqs_")
        return np.array([f"exp{n:+d}" for n in self.freqs_.indices], dtype=object)


class SparseCircleMapRegressor(RegressorMixin, BaseEstimator):
    """Complex Lasso on the Fourier design of a circle map.

    Parameters
    ----------
    nmax : int
        Largest frequency; the design has ``2 * nmax + 1`` columns.
    alpha : float or None
        Regularisation level. When None it is set from ``sigma`` by the rule
        ``lambda_constant * sigma * sqrt(log N / M)``.
    sigma : float or None
        Noise standard deviation used by the rule above.
    symmetrize : bool
        Project the solution onto Hermitian-symmetric (real-valued) maps.
    implicit : bool
        Generate design columns on the fly instead of storing the matrix.
    """

    def __init__(self, nmax=15, alpha=None, sigma=None, lambda_constant=4.0, tol=1e-10,
                 max_iter=100_000, path_points_per_decade=5, symmetrize=True, implicit=False):
        self.nmax = nmax
        self.alpha = alpha
        self.sigma = sigma
        self.lambda_constant = lambda_constant
        self.tol = tol
        self.max_iter = max_iter
        self.path_points_per_decade = path_points_per_decade
        self.symmetrize = symmetrize
        self.implicit = implicit

    def _lambda(self, N, M):
        if self.alpha is not None:
            return float(self.alpha)
        if self.sigma is None:
            raise ValueError("set either alpha or sigma")
        return lambda_rule(self.sigma, N, M, self.lambda_constant)

    def fit(self, X, y, coef_init=None):
        x = check_points(X)
        y = check_targets(y, x.size)
        freqs = FrequencySet(self.nmax)
        lam = self._lambda(freqs.size, x.size)
        system = build_measurement((x, y), freqs, implicit=self.implicit)
        cfg = LassoConfig(lam, self.max_iter, self.tol, self.symmetrize, self.path_points_per_decade)
        sol = solve_lasso(system, cfg, init=coef_init)
        if not sol.converged:
            warnings.warn(f"coordinate descent stopped after {sol.iterations_used} sweeps "
                          f"without converging", ConvergenceWarning)
        self.freqs_ = freqs
        self.coef_ = sol.coeffs
        self.lambda_ = lam
        self.solution_ = sol
        self.n_iter_ = sol.iterations_used
        self.n_features_in_ = 1
        return self

    def to_trigpoly(self) -> TrigPoly:
        check_is_fitted(self, "coef_")
        return TrigPoly.from_dense(self.coef_, self.freqs_, real_valued=self.symmetrize)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return self.to_trigpoly()(check_points(X)).real

    def support(self, threshold=0.0):
        """Frequencies whose fitted coefficient exceeds ``threshold`` in modulus."""
        check_is_fitted(self, "coef_")
        return self.freqs_.indices[np.abs(self.coef_) > threshold]


class InvariantDensityEstimator(BaseEstimator):
    """Histogram estimate of the density of orbit states on ``[0, 1)``."""

    def __init__(self, bins=64):
        self.bins = bins

    def fit(self, X, y=None):
        states = check_points(X)
        self.estimate_ = estimate_density(states, self.bins)
        self.density_ = self.estimate_.density
        self.xi_h_ = density_lower_bound(self.estimate_)
        self.n_features_in_ = 1
        return self

    def score_samples(self, X):
        """Histogram density value at each point."""
        check_is_fitted(self, "estimate_")
        x = check_points(X)
        pos = np.minimum((x * self.bins).astype(int), self.bins - 1)
        return self.density_[pos]

    def covariance(self, nmax):
        check_is_fitted(self, "estimate_")
        return covariance_from_density(self.estimate_, nmax)
