"""Low-rank Gaussian-process regression on top of a knot factorization.

The observation model is ``y_i = mu + tau * omega(s_i) + tau * e_i`` with iid
N(0, sigma2) noise and a centered process omega whose covariance over the
fitted points is replaced by the rank-m reconstruction from a
:class:`~adapp.lowrank.LowRankFactor`.  Two replacement modes are supported:

* ``"dtc"``       prior covariance R'R;
* ``"modified"``  R'R plus the diagonal of residual variances, which restores
  the exact pointwise prior variances.

Likelihood and prediction run through rank-m identities in O(N m^2) time and
O(N m) memory; no dense N x N matrix is formed.

Prediction-set discipline: the fitted points are conditioned on jointly, but
prediction points receive marginal (pointwise) summaries only.  Include a
point in the fitted set whenever its joint covariance with other points
matters downstream.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_scalar, check_vector
from .errors import NumericalBreakdownError
from .kernels import VaryingCoefficientSum
from .lowrank import (
    full_cholesky,
    knot_features,
    kappa_s,
    pivoted_ichol,
    residual_variances,
)

__all__ = [
    "Posterior",
    "ComponentPosterior",
    "PredictiveProcessRegressor",
    "marginal_loglik",
    "posterior_predict",
    "component_posterior",
    "simulate_pp",
    "MODES",
]

MODES = ("dtc", "modified")

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Posterior:
    """Pointwise posterior mean and variance."""

    mean: np.ndarray
    var: np.ndarray

    @property
    def sd(self):
        return np.sqrt(self.var)


@dataclass(frozen=True)
class ComponentPosterior:
    """Posterior summaries of the sum kernel's coefficient processes.

    Row j of each array describes omega_j at the evaluation points; effect
    sizes are posterior means over posterior standard deviations (floored at
    1e-12).
    """

    means: np.ndarray
    variances: np.ndarray
    effect_sizes: np.ndarray

    @property
    def n_components(self):
        return self.means.shape[0]


def _factor_core_matrix(M):
    """Cholesky of the m x m core, with a warned jitter retry on breakdown."""
    if not np.all(np.isfinite(M)):
        raise NumericalBreakdownError("non-finite entries in the rank-m core matrix")
    try:
        return cho_factor(M, lower=False)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(M) / M.shape[0]
        warnings.warn(
            f"rank-m core factorization failed; retrying with jitter {jitter:.3e}",
            RuntimeWarning,
        )
        try:
            return cho_factor(M + jitter * np.eye(M.shape[0]), lower=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdownError("rank-m core matrix is not factorizable") from exc


class _Core:
    """Cached rank-m solves shared by likelihood evaluation and prediction."""

    def __init__(self, y, factor, mu, tau2, sigma2, mode):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        mu = check_scalar(mu, "mu")
        tau2 = check_scalar(tau2, "tau2", positive=True)
        sigma2 = check_scalar(sigma2, "sigma2", positive=True)
        y = check_vector(y, factor.n)

        self.factor = factor
        self.mode = mode
        self.mu = mu
        self.tau2 = tau2
        self.sigma2 = sigma2

        n = factor.n
        m = factor.rank
        A = factor.rows[:, factor.inverse_pivot()]  # m x N, original column order
        lam = np.full(n, sigma2)
        if mode == "modified":
            lam += residual_variances(factor)
        self.A = A
        self.lam = lam
        self.A_over_lam = A / lam
        M = np.eye(m) + self.A_over_lam @ A.T
        self.cho = _factor_core_matrix(M)

        r = y - mu
        self._r_over_lam = r / lam
        t = self.A_over_lam @ r
        # A C^{-1} r collapses to M^{-1} t, which sidesteps the cancellation
        # the long Woodbury expression suffers from at small noise
        self.z = cho_solve(self.cho, t)
        quad = float(r @ self._r_over_lam - t @ self.z)
        logdet = float(np.log(lam).sum() + 2.0 * np.log(np.diag(self.cho[0])).sum())
        self.loglik = -0.5 * (n * _LOG_2PI + n * np.log(tau2) + logdet + quad / tau2)
        if not np.isfinite(self.loglik):
            raise NumericalBreakdownError("log likelihood is not finite")
        self._gain = None
        self._w = None

    @property
    def gain(self):
        """m x m matrix A C^{-1} A', used for predictive variances; equals I - M^{-1}."""
        if self._gain is None:
            m = self.A.shape[0]
            self._gain = np.eye(m) - cho_solve(self.cho, np.eye(m))
        return self._gain

    @property
    def w(self):
        """Weight vector C^{-1} (y - mu), used for exact-cross posteriors."""
        if self._w is None:
            self._w = self._r_over_lam - self.A_over_lam.T @ self.z
        return self._w

    def quadratic(self, C):
        """Columnwise c' C^{-1} c for an N x q matrix of cross-covariances."""
        scaled = C / self.lam[:, None]
        first = np.einsum("iq,iq->q", C, scaled)
        T = self.A @ scaled
        second = np.einsum("kq,kq->q", T, cho_solve(self.cho, T))
        return first - second


def marginal_loglik(y, factor, *, sigma2, mu=0.0, tau2=1.0, mode="dtc"):
    """Log density of y under the rank-m prior plus scaled noise.

    The covariance of y is ``tau2 * (C_hat + sigma2 * I)`` where C_hat is the
    low-rank reconstruction (plus the residual diagonal in modified mode).
    Computed through the m x m core in O(N m^2); matches the dense N x N
    evaluation to high accuracy.
    """
    return _Core(y, factor, mu, tau2, sigma2, mode).loglik


def _posterior_from_core(core, new_points):
    factor = core.factor
    X = factor.kernel.validate(new_points, "new_points")
    U = knot_features(factor, X)  # n* x m
    mean = core.mu + U @ core.z
    prior_var = np.einsum("ij,ij->i", U, U)
    if core.mode == "modified":
        # restore exact pointwise prior variances, as on the fitted set
        prior_var = np.maximum(factor.kernel.diag(X), prior_var)
    reduction = np.einsum("ij,ij->i", U @ core.gain, U)
    var = core.tau2 * (prior_var - reduction)
    var[var < 0.0] = 0.0
    return Posterior(mean=mean, var=var)


def posterior_predict(y, factor, new_points, *, sigma2, mu=0.0, tau2=1.0, mode="dtc"):
    """Pointwise posterior of ``mu + tau * omega(t)`` at each new point.

    Cross-covariances run through the m knots, so the cost is
    O((N + n_new) m^2).  Covariate-bearing kernels need the covariate columns
    supplied for the new points as well.  In the noiseless limit the mean
    interpolates the data at the knots.
    """
    core = _Core(y, factor, mu, tau2, sigma2, mode)
    return _posterior_from_core(core, new_points)


def _component_posterior_from_core(core, at_points):
    factor = core.factor
    kernel = factor.kernel
    if not isinstance(kernel, VaryingCoefficientSum):
        raise ValueError("component posteriors require a VaryingCoefficientSum kernel")
    X = kernel.validate(at_points, "at_points")
    tau = np.sqrt(core.tau2)
    n_comp = kernel.n_components
    means = np.empty((n_comp, X.shape[0]))
    variances = np.empty_like(means)
    for j in range(n_comp):
        cross = kernel.component_cross(j, factor.points, X)  # N x n*
        means[j] = (cross.T @ core.w) / tau
        var_j = kernel.scales[j] ** 2 - core.quadratic(cross)
        var_j[var_j < 0.0] = 0.0
        variances[j] = var_j
    effect = means / np.maximum(np.sqrt(variances), 1e-12)
    return ComponentPosterior(means=means, variances=variances, effect_sizes=effect)


def component_posterior(y, factor, at_points, *, sigma2, mu=0.0, tau2=1.0, mode="dtc"):
    """Posterior of each coefficient process omega_j at the given points.

    Cross-covariances between omega_j(t) and the observations are exact
    (the low-rank approximation applies to the fitted N x N block only), so
    the covariate-weighted component means add up to the posterior mean of
    omega itself.
    """
    core = _Core(y, factor, mu, tau2, sigma2, mode)
    return _component_posterior_from_core(core, at_points)


def simulate_pp(factor, n_draws=10_000, seed=0):
    """Joint draws of the rank-m process and its residual on the fitted set.

    Samples the exact process densely (small point sets only), conditions on
    the knot values to get the rank-m extrapolation nu, and returns
    ``(nu, xi)`` with ``xi = omega - nu``, each of shape (n_draws, N) in
    original point order.  nu reproduces omega exactly at the knots, and the
    per-point sample variance of xi estimates ``residual_variances(factor)``.
    """
    n_draws = int(n_draws)
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    gram = factor.kernel(factor.points)
    upper = full_cholesky(gram)
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n_draws, factor.n)) @ upper
    L = factor.rows[:, : factor.rank]
    V = solve_triangular(L, omega[:, factor.knot_indices].T, trans="T", lower=False)
    nu = V.T @ factor.rows[:, factor.inverse_pivot()]
    return nu, omega - nu


class PredictiveProcessRegressor(RegressorMixin, BaseEstimator):
    """Gaussian-process regression with tolerance-driven knot selection.

    Fitting selects knots for the configured kernel via the pivoted
    incomplete Cholesky and conditions on the observations through the
    rank-m representation.  When ``mu`` or ``tau2`` are left unset they are
    fixed at the sample mean and variance of y.

    Parameters
    ----------
    kernel : Kernel
    rel_tol : float
        Knot-selection tolerance on the standard-deviation scale, relative
        to the largest prior standard deviation.
    m_max : int or None
        Rank cap passed to the factorization.
    sigma2 : float
        Noise variance relative to ``tau2``.
    mode : {"dtc", "modified"}
    mu, tau2 : float or None
        Fixed mean and scale; None means "set from y at fit time".

    Attributes
    ----------
    factor_ : LowRankFactor
    mu_, tau2_ : float
    rank_ : int
    kappa_s_ : float
    log_marginal_likelihood_ : float
    """

    def __init__(self, kernel, rel_tol=1e-2, m_max=None, sigma2=0.1, mode="dtc",
                 mu=None, tau2=None):
        self.kernel = kernel
        self.rel_tol = rel_tol
        self.m_max = m_max
        self.sigma2 = sigma2
        self.mode = mode
        self.mu = mu
        self.tau2 = tau2

    def fit(self, X, y):
        factor = pivoted_ichol(self.kernel, X, rel_tol=self.rel_tol, m_max=self.m_max)
        y = check_vector(y, factor.n)
        mu = float(np.mean(y)) if self.mu is None else check_scalar(self.mu, "mu")
        if self.tau2 is None:
            tau2 = float(np.var(y))
            if tau2 <= 0.0:
                raise ValueError("y is constant; pass an explicit positive tau2")
        else:
            tau2 = check_scalar(self.tau2, "tau2", positive=True)
        self._core = _Core(y, factor, mu, tau2, self.sigma2, self.mode)
        self.factor_ = factor
        self.mu_ = mu
        self.tau2_ = tau2
        self.rank_ = factor.rank
        self.kappa_s_ = kappa_s(factor)
        self.log_marginal_likelihood_ = self._core.loglik
        self.n_features_in_ = factor.points.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "_core"):
            raise NotFittedError("this estimator must be fitted before prediction")

    def predict(self, X, return_std=False):
        self._check_fitted()
        post = _posterior_from_core(self._core, X)
        if return_std:
            return post.mean, post.sd
        return post.mean

    def predict_posterior(self, X):
        """Full pointwise Posterior (mean and variance) at the rows of X."""
        self._check_fitted()
        return _posterior_from_core(self._core, X)

    def component_posterior(self, X):
        """Per-component coefficient posteriors; sum kernels only."""
        self._check_fitted()
        return _component_posterior_from_core(self._core, X)
