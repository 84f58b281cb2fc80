"""Random-walk Metropolis over covariance and noise parameters.

Every evaluated parameter value re-runs the knot selection for the kernel it
induces, so the rank-m representation always matches the parameters being
scored; the rank in use is recorded sweep by sweep.

Priors: each positive kernel parameter gets a standard normal folded onto
the positive half line, and log(sigma2) gets a standard normal, all
independent.  Proposals are joint Gaussian increments on the logs of all
parameters; the acceptance ratio carries the log-transform volume
correction for the folded-prior parameters (the sigma2 prior is already a
density in log(sigma2), so it needs none).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .lowrank import pivoted_ichol
from .regression import marginal_loglik

__all__ = [
    "SamplerConfig",
    "Chain",
    "RWMState",
    "folded_normal_logpdf",
    "log_prior",
    "log_posterior",
    "rwm_step",
    "run_chain",
]

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_2 = np.log(2.0)


def folded_normal_logpdf(x):
    """Log density of |Z| for standard normal Z; -inf outside x > 0."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0.0, _LOG_2 - 0.5 * x * x - _HALF_LOG_2PI, -np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def log_prior(kernel_params, sigma2):
    """Joint log prior on the original parameter scale.

    Folded standard normals on the kernel parameters plus a standard normal
    density evaluated at log(sigma2).  Nonpositive or non-finite parameters
    return -inf rather than raising.
    """
    kp = np.atleast_1d(np.asarray(kernel_params, dtype=float))
    sigma2 = float(sigma2)
    if not np.all(np.isfinite(kp)) or np.any(kp <= 0.0):
        return -np.inf
    if not np.isfinite(sigma2) or sigma2 <= 0.0:
        return -np.inf
    log_s2 = np.log(sigma2)
    total = float(np.sum(folded_normal_logpdf(kp)))
    total += -0.5 * log_s2 * log_s2 - _HALF_LOG_2PI
    return total


def _posterior_parts(kernel_params, sigma2, kernel, X, y, mu, tau2, mode, rel_tol, m_max):
    """(log posterior, rank, knot indices); -inf on prior violation or breakdown."""
    lp = log_prior(kernel_params, sigma2)
    if not np.isfinite(lp):
        return -np.inf, 0, None
    trial = kernel.with_params(np.atleast_1d(np.asarray(kernel_params, dtype=float)))
    try:
        factor = pivoted_ichol(trial, X, rel_tol=rel_tol, m_max=m_max)
        ll = marginal_loglik(y, factor, sigma2=sigma2, mu=mu, tau2=tau2, mode=mode)
    except NumericalError as exc:
        warnings.warn(f"numerical failure at proposed parameters: {exc}", RuntimeWarning)
        return -np.inf, 0, None
    return lp + ll, factor.rank, factor.knot_indices.copy()


def log_posterior(kernel_params, sigma2, kernel, X, y, *, mu, tau2, mode="dtc",
                  rel_tol=1e-2, m_max=None):
    """Unnormalized log posterior density and the rank its evaluation used.

    Rebuilds the kernel at the given parameter vector, reselects the knots,
    and adds the marginal log likelihood to the log prior.  Numerical
    breakdowns are reported as -inf with a warning rather than raised.
    """
    value, rank, _ = _posterior_parts(
        kernel_params, sigma2, kernel, X, y, mu, tau2, mode, rel_tol, m_max
    )
    return value, rank


@dataclass
class RWMState:
    """Current sampler position on the log-parameter scale.

    ``log_target`` caches the target value at ``log_params`` including the
    transform volume correction.
    """

    log_params: np.ndarray
    log_target: float
    rank: int = 0
    knots: np.ndarray | None = None


def rwm_step(state, step_sizes, rng, log_target):
    """One joint Metropolis update with Gaussian increments on log parameters.

    ``log_target`` maps a log-parameter vector to (value, rank, knots); the
    proposal is accepted with probability min(1, exp(value - current)).  The
    rng is consumed in a fixed order (one increment vector, then one
    uniform), so chains are reproducible.  Returns (new state, accepted).
    """
    z = rng.standard_normal(state.log_params.size)
    proposal = state.log_params + np.asarray(step_sizes, dtype=float) * z
    value, rank, knots = log_target(proposal)
    log_u = np.log(rng.uniform())
    if log_u < value - state.log_target:
        return RWMState(proposal, value, rank, knots), True
    return state, False


@dataclass
class SamplerConfig:
    """Settings for :func:`run_chain`.

    ``step_sizes`` applies on the log-parameter scale; a scalar broadcasts
    over all parameters.  With ``adapt_steps`` a global scale factor is tuned
    toward ``target_accept`` during burn-in by a decaying stochastic
    approximation and frozen afterwards, preserving the Markov property of
    the retained sweeps.  ``init`` holds original-scale starting values
    (kernel parameters then sigma2); ones by default.
    """

    n_sweeps: int
    burn_in: int
    thin: int = 1
    step_sizes: object = 0.2
    seed: int = 0
    rel_tol: float = 1e-2
    m_max: int | None = None
    adapt_steps: bool = True
    target_accept: float = 0.25
    init: object = None
    record_knots: bool = False


@dataclass
class Chain:
    """Full sampler trace plus burn-in and thinning aware summaries.

    Per-sweep records cover every sweep, including burn-in; ``medians`` and
    the central 95% interval are computed from the retained (post burn-in,
    thinned) sweeps, and ``acceptance_rate`` from the post burn-in sweeps.
    """

    param_names: list
    params: np.ndarray
    log_post: np.ndarray
    rank: np.ndarray
    accepted: np.ndarray
    burn_in: int
    thin: int
    acceptance_rate: float
    medians: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    knots: list | None = None

    @property
    def n_sweeps(self):
        return self.params.shape[0]

    def kept(self):
        """Retained parameter draws (post burn-in, thinned)."""
        return self.params[self.burn_in :: self.thin]


def run_chain(config, X, y, kernel, *, mu=None, tau2=None, mode="dtc"):
    """Run a random-walk Metropolis chain over kernel parameters and sigma2.

    Knots are reselected at every evaluated parameter vector; nothing is
    cached across parameter values.  ``mu`` and ``tau2`` default to the
    sample mean and variance of y.  The chain is a pure function of
    (config, X, y, kernel), so a fixed seed reproduces it bitwise.
    """
    y = np.asarray(y, dtype=float)
    mu = float(np.mean(y)) if mu is None else float(mu)
    tau2 = float(np.var(y)) if tau2 is None else float(tau2)
    names = list(kernel.param_names) + ["sigma2"]
    n_par = len(names)

    n_sweeps = int(config.n_sweeps)
    burn_in = int(config.burn_in)
    thin = int(config.thin)
    if n_sweeps < 1:
        raise ValueError("n_sweeps must be >= 1")
    if not 0 <= burn_in < n_sweeps:
        raise ValueError("burn_in must satisfy 0 <= burn_in < n_sweeps")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    steps = np.broadcast_to(np.asarray(config.step_sizes, dtype=float), (n_par,)).copy()
    if np.any(steps <= 0.0) or not np.all(np.isfinite(steps)):
        raise ValueError("step_sizes must be positive and finite")
    if not 0.0 < config.target_accept < 1.0:
        raise ValueError("target_accept must lie in (0, 1)")
    init = np.ones(n_par) if config.init is None else np.asarray(config.init, dtype=float)
    if init.shape != (n_par,) or np.any(init <= 0.0) or not np.all(np.isfinite(init)):
        raise ValueError(f"init must be {n_par} positive values (kernel params then sigma2)")
    X = kernel.validate(X)

    def target(log_params):
        params = np.exp(log_params)
        value, rank, knots = _posterior_parts(
            params[:-1], params[-1], kernel, X, y, mu, tau2, mode,
            config.rel_tol, config.m_max,
        )
        if np.isfinite(value):
            value += log_params[:-1].sum()  # volume correction, folded-prior params only
        return value, rank, knots

    rng = np.random.default_rng(config.seed)
    state = RWMState(np.log(init), *target(np.log(init)))
    if not np.isfinite(state.log_target):
        raise ValueError("initial parameters have zero posterior density")

    params_trace = np.empty((n_sweeps, n_par))
    log_post = np.empty(n_sweeps)
    rank_trace = np.zeros(n_sweeps, dtype=int)
    accepted = np.zeros(n_sweeps, dtype=bool)
    knots_trace = [] if config.record_knots else None
    scale = 1.0
    for t in range(n_sweeps):
        state, was_accepted = rwm_step(state, steps * scale, rng, target)
        if config.adapt_steps and t < burn_in:
            gain = (t + 1.0) ** -0.6
            scale *= np.exp(gain * ((1.0 if was_accepted else 0.0) - config.target_accept))
        params_trace[t] = np.exp(state.log_params)
        log_post[t] = state.log_target - state.log_params[:-1].sum()
        rank_trace[t] = state.rank
        accepted[t] = was_accepted
        if knots_trace is not None:
            knots_trace.append(state.knots)

    kept = params_trace[burn_in::thin]
    return Chain(
        param_names=names,
        params=params_trace,
        log_post=log_post,
        rank=rank_trace,
        accepted=accepted,
        burn_in=burn_in,
        thin=thin,
        acceptance_rate=float(accepted[burn_in:].mean()),
        medians=np.median(kept, axis=0),
        ci_lower=np.quantile(kept, 0.025, axis=0),
        ci_upper=np.quantile(kept, 0.975, axis=0),
        knots=knots_trace,
    )
