"""Adaptive predictive-process Gaussian processes.

A low-rank approximation of a Gaussian process is only as good as the knots
it tracks, and where those knots should sit changes with every covariance
parameter value.  This package selects knots by a pivoted incomplete
Cholesky factorization with tolerance-based stopping, certifies the result
with computable tail bounds, and builds O(N m^2) Gaussian-process regression
and random-walk Metropolis sampling on top, reselecting the knots at every
parameter value visited.
"""

from .bounds import continuum_tail, eps_for_confidence, finite_set_tail
from .data import Dataset, gen_spatial, gen_toy, load_csv, write_csv
from .errors import NotPSDError, NumericalBreakdownError, NumericalError
from .kernels import (
    ARDSquaredExponential,
    Kernel,
    ScaledProjectedSE,
    VaryingCoefficientSum,
    canonical_distance,
)
from .lowrank import (
    KnotSelector,
    LowRankFactor,
    RANK_CAP_HIT,
    TOLERANCE_MET,
    full_cholesky,
    kappa_s,
    knot_features,
    modified_reconstruct,
    pivoted_ichol,
    reconstruct,
    residual_variances,
)
from .mcmc import (
    Chain,
    RWMState,
    SamplerConfig,
    folded_normal_logpdf,
    log_posterior,
    log_prior,
    run_chain,
    rwm_step,
)
from .regression import (
    ComponentPosterior,
    Posterior,
    PredictiveProcessRegressor,
    component_posterior,
    marginal_loglik,
    posterior_predict,
    simulate_pp,
)

__version__ = "0.1.0"

__all__ = [
    "ARDSquaredExponential",
    "Chain",
    "ComponentPosterior",
    "Dataset",
    "Kernel",
    "KnotSelector",
    "LowRankFactor",
    "NotPSDError",
    "NumericalBreakdownError",
    "NumericalError",
    "Posterior",
    "PredictiveProcessRegressor",
    "RANK_CAP_HIT",
    "RWMState",
    "SamplerConfig",
    "ScaledProjectedSE",
    "TOLERANCE_MET",
    "VaryingCoefficientSum",
    "canonical_distance",
    "component_posterior",
    "continuum_tail",
    "eps_for_confidence",
    "finite_set_tail",
    "folded_normal_logpdf",
    "full_cholesky",
    "gen_spatial",
    "gen_toy",
    "kappa_s",
    "knot_features",
    "load_csv",
    "log_posterior",
    "log_prior",
    "marginal_loglik",
    "modified_reconstruct",
    "pivoted_ichol",
    "posterior_predict",
    "reconstruct",
    "residual_variances",
    "run_chain",
    "rwm_step",
    "simulate_pp",
    "write_csv",
]
