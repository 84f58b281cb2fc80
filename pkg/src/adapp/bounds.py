"""A priori tail bounds on the low-rank approximation error.

The bounds control the residual left after conditioning a centered Gaussian
process on its values at the selected knots: the probability that the
largest absolute residual exceeds a threshold ``eps``.  They depend on the
approximation only through the largest residual standard deviation, which
the factorization reports directly, so accuracy can be certified before any
data are fit.
"""

import numpy as np

from ._validation import check_scalar

__all__ = ["finite_set_tail", "continuum_tail", "eps_for_confidence"]


def _checked_set_size(set_size):
    set_size = int(set_size)
    if set_size < 1:
        raise ValueError(f"set_size must be >= 1, got {set_size}")
    return set_size


def finite_set_tail(eps, kappa_s, set_size, modified=False, cap=True):
    """Bound on P(max over the candidate set |residual| > eps).

    Evaluates ``3 * exp(-eps^2 / (9 * kappa^2 * (2 + log(set_size))))`` with
    ``kappa^2`` doubled when ``modified`` is set, accounting for the
    variance-restoring diagonal correction.  Values above 1 are truncated
    unless ``cap=False``.  Returns 0 when ``kappa_s`` is 0 (the approximation
    is exact on the set).
    """
    eps = check_scalar(eps, "eps", positive=True)
    kappa_s = check_scalar(kappa_s, "kappa_s", nonnegative=True)
    set_size = _checked_set_size(set_size)
    if kappa_s == 0.0:
        return 0.0
    kappa_sq = kappa_s * kappa_s
    if modified:
        kappa_sq *= 2.0
    value = 3.0 * np.exp(-(eps * eps) / (9.0 * kappa_sq * (2.0 + np.log(set_size))))
    return float(min(1.0, value)) if cap else float(value)


def continuum_tail(eps, kappa, p, a, b, c, cap=True):
    """Bound on P(sup over the whole box [a, b]^p |residual| > eps).

    Valid for processes whose increment variances grow at most like
    ``c^2 ||s - t||^2``.  Evaluates ``3 * exp(-eps^2 / (B^2 * kappa))`` with
    ``B = 27 sqrt(2 p c (b - a))``; note that ``kappa`` (the largest residual
    standard deviation) enters to the first power here.
    """
    eps = check_scalar(eps, "eps", positive=True)
    kappa = check_scalar(kappa, "kappa", nonnegative=True)
    p = int(p)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = check_scalar(a, "a")
    b = check_scalar(b, "b")
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    c = check_scalar(c, "c", positive=True)
    if kappa == 0.0:
        return 0.0
    b_sq = 729.0 * 2.0 * p * c * (b - a)
    value = 3.0 * np.exp(-(eps * eps) / (b_sq * kappa))
    return float(min(1.0, value)) if cap else float(value)


def eps_for_confidence(target_prob, kappa_s, set_size, modified=False):
    """Smallest eps whose finite-set tail bound is at most ``target_prob``.

    Inverts ``finite_set_tail`` in closed form; the round trip
    ``finite_set_tail(eps_for_confidence(p, ...), ...)`` returns ``p``
    exactly up to round-off.  Returns 0 when ``kappa_s`` is 0.
    """
    target_prob = check_scalar(target_prob, "target_prob")
    if not 0.0 < target_prob < 1.0:
        raise ValueError(f"target_prob must lie in (0, 1), got {target_prob}")
    kappa_s = check_scalar(kappa_s, "kappa_s", nonnegative=True)
    set_size = _checked_set_size(set_size)
    if kappa_s == 0.0:
        return 0.0
    kappa_sq = kappa_s * kappa_s
    if modified:
        kappa_sq *= 2.0
    return float(
        np.sqrt(9.0 * kappa_sq * (2.0 + np.log(set_size)) * np.log(3.0 / target_prob))
    )
