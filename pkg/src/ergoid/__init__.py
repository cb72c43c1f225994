"""Recover sparse circle maps from a single orbit of their own dynamics."""

from .config import ExperimentConfig, config_from_mapping, load_config
from .dynamics import (
    DensityEstimate,
    ObservationSet,
    Trajectory,
    density_lower_bound,
    estimate_density,
    sample_observations,
    simulate,
)
from .estimators import FourierFeatures, InvariantDensityEstimator, SparseCircleMapRegressor
from .exceptions import (
    ConfigError,
    DynamicsError,
    ErgoidError,
    ExperimentError,
    FitError,
    NumericalRankError,
    ParameterError,
)
from .experiments import (
    TrialResult,
    fit_error_scaling,
    run_identification,
    run_phase_diagram,
    run_trial,
    trial_seed,
)
from .lasso import (
    LassoConfig,
    LassoSolution,
    debias_on_support,
    kkt_residual,
    l0_oracle,
    lambda_rule,
    soft_threshold_complex,
    solve_lasso,
)
from .sensing import CovarianceMatrix, MeasurementSystem, build_measurement, covariance_from_density
from .spectra import (
    certify,
    corollary1_ell,
    lemma1_certificate,
    lemma2_certificate,
    re_estimate_monte_carlo,
    sample_size_bound,
    sparse_eigenvalue_min,
)
from .trigpoly import (
    FrequencySet,
    TrigPoly,
    evaluate,
    hermitian_symmetrize,
    random_sparse_map,
    validate_circle_map,
    wiener_norm,
)

__version__ = "0.1.0"
