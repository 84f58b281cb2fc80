"""Pivoted incomplete Cholesky factorization with dynamic stopping.

The factorization selects knots greedily: at each step the point with the
largest remaining conditional variance is swapped to the front of the pivot
order and one more factor row is computed.  It stops once every remaining
conditional variance falls below an absolute tolerance derived from the
requested relative tolerance, or once a rank cap is reached.  Kernel values
are computed lazily, one row per selected knot, so the whole run takes
O(N m^2) time and O(N m) memory; no N x N array is ever allocated.

Run with ``rel_tol=0`` and ``m_max=None`` this is a complete pivoted
factorization of the kernel matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_scalar
from .errors import NotPSDError
from .kernels import Kernel

__all__ = [
    "LowRankFactor",
    "KnotSelector",
    "pivoted_ichol",
    "full_cholesky",
    "residual_variances",
    "kappa_s",
    "reconstruct",
    "modified_reconstruct",
    "knot_features",
    "TOLERANCE_MET",
    "RANK_CAP_HIT",
]

TOLERANCE_MET = "tolerance_met"
RANK_CAP_HIT = "rank_cap_hit"

# Residual diagonals this far below zero (relative to the largest initial
# variance) indicate a genuinely non-PSD kernel rather than round-off.
_BREAKDOWN_RTOL = 1e-8


@dataclass(frozen=True)
class LowRankFactor:
    """Rank-m factor of a kernel matrix in a pivoted order.

    ``rows`` is the m x N factor R in pivoted column order (entries left of
    the diagonal are zero); column k of the first m columns corresponds to
    knot ``pivot[k]``.  Un-permuted, R'R is the covariance of the rank-m
    approximating process on the full point set.  ``resid_diag`` follows the
    pivoted order as well: exact zeros at the m selected positions and the
    conditional variance given the knots everywhere else.

    ``abs_tol`` is the absolute tolerance actually used (relative tolerance
    times the largest initial standard deviation) and ``terminated_by``
    records whether the run stopped because the tolerance was met or because
    the rank cap was hit.
    """

    kernel: Kernel
    points: np.ndarray
    pivot: np.ndarray
    rank: int
    rows: np.ndarray
    resid_diag: np.ndarray
    abs_tol: float
    terminated_by: str

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def knot_indices(self):
        """Original indices of the selected knots, in selection order."""
        return self.pivot[: self.rank]

    @property
    def knot_points(self):
        return self.points[self.knot_indices]

    def inverse_pivot(self):
        """Positions of the original indices within the pivoted order."""
        inv = np.empty(self.n, dtype=np.intp)
        inv[self.pivot] = np.arange(self.n)
        return inv


def pivoted_ichol(kernel, points, rel_tol=1e-2, m_max=None):
    """Greedy low-rank factorization of the kernel matrix over ``points``.

    Parameters
    ----------
    kernel : Kernel
    points : array of point rows accepted by the kernel
    rel_tol : float >= 0
        Relative tolerance on the standard-deviation scale.  The absolute
        tolerance is ``rel_tol * sqrt(max_i psi(s_i, s_i))``; selection stops
        once every remaining conditional variance is at most its square.
        0 requests a complete factorization.
    m_max : int or None
        Rank cap; defaults to the number of points.

    Returns
    -------
    LowRankFactor
        Hitting ``m_max`` before the tolerance is met is reported through
        ``terminated_by``, not as an error.

    Raises
    ------
    NotPSDError
        If a residual variance falls below -1e-8 times the largest initial
        variance.  Smaller negative values are treated as round-off and
        clamped to zero.
    """
    points = kernel.validate(points, "points")
    n = points.shape[0]
    rel_tol = check_scalar(rel_tol, "rel_tol", nonnegative=True)
    if m_max is None:
        m_max = n
    m_max = int(m_max)
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    m_max = min(m_max, n)

    d = np.array(kernel.diag(points), dtype=float)
    if d.shape != (n,) or not np.all(np.isfinite(d)):
        raise ValueError("kernel diagonal must be finite with one entry per point")
    d_max0 = float(d.max())
    if np.any(d < -_BREAKDOWN_RTOL * max(d_max0, 0.0)):
        raise NotPSDError("negative pointwise variance")
    np.clip(d, 0.0, None, out=d)
    if d_max0 <= 0.0:
        raise ValueError("kernel variance is identically zero; nothing to factor")
    abs_tol = float(np.sqrt(d_max0) * rel_tol)
    tol2 = abs_tol * abs_tol
    floor = -_BREAKDOWN_RTOL * d_max0

    perm = np.arange(n)
    capacity = min(n, 16)
    rows = np.zeros((capacity, n))
    k = 0
    while True:
        if k == n:
            # every point became a knot, no residual left
            terminated_by = TOLERANCE_MET
            break
        j = k + int(np.argmax(d[k:]))
        d_pivot = d[j]
        # the first pivot is always taken so the factor has rank >= 1
        if k > 0 and d_pivot <= tol2:
            terminated_by = TOLERANCE_MET
            break
        if k == m_max:
            terminated_by = RANK_CAP_HIT
            break
        if j != k:
            perm[[k, j]] = perm[[j, k]]
            d[[k, j]] = d[[j, k]]
            rows[:k, [k, j]] = rows[:k, [j, k]]
        if k == capacity:
            capacity = min(n, 2 * capacity)
            grown = np.zeros((capacity, n))
            grown[:k] = rows
            rows = grown
        r_kk = np.sqrt(d_pivot)
        rows[k, k] = r_kk
        if k + 1 < n:
            tail = kernel(points[perm[k]], points[perm[k + 1 :]])[0]
            if k > 0:
                tail = tail - rows[:k, k] @ rows[:k, k + 1 :]
            tail /= r_kk
            rows[k, k + 1 :] = tail
            trailing = d[k + 1 :]
            trailing -= tail * tail
            if trailing.min() < floor:
                raise NotPSDError(
                    f"residual variance {trailing.min():.3e} after {k + 1} pivots"
                )
            trailing[trailing < 0.0] = 0.0
        d[k] = 0.0
        k += 1

    m = k
    resid = d
    resid[:m] = 0.0
    return LowRankFactor(
        kernel=kernel,
        points=points,
        pivot=perm,
        rank=m,
        rows=rows[:m].copy(),
        resid_diag=resid,
        abs_tol=abs_tol,
        terminated_by=terminated_by,
    )


def full_cholesky(gram):
    """Dense unpivoted Cholesky factor (upper triangular) of a PSD matrix.

    Tolerates exact rank deficiency: a residual pivot consistent with zero
    yields a zero row.  Raises NotPSDError when a residual pivot falls below
    -1e-8 times the largest diagonal entry.
    """
    G = np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("gram must be a square matrix")
    if not np.all(np.isfinite(G)):
        raise ValueError("gram contains non-finite entries")
    scale = float(max(np.abs(np.diag(G)).max(), 1e-300))
    if np.max(np.abs(G - G.T)) > 1e-8 * scale:
        raise ValueError("gram must be symmetric")
    n = G.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        pivot = G[i, i] - L[:i, i] @ L[:i, i]
        if pivot < -_BREAKDOWN_RTOL * scale:
            raise NotPSDError(f"pivot {pivot:.3e} at position {i}")
        if pivot <= 1e-14 * scale:
            continue  # linearly dependent row, leave it zero
        lii = np.sqrt(pivot)
        L[i, i] = lii
        if i + 1 < n:
            L[i, i + 1 :] = (G[i, i + 1 :] - L[:i, i] @ L[:i, i + 1 :]) / lii
    return L


def residual_variances(factor):
    """Conditional variances Var{omega(s_i) | knots}, in original point order."""
    out = np.zeros(factor.n)
    out[factor.pivot] = factor.resid_diag
    return out


def kappa_s(factor):
    """Largest residual standard deviation over the candidate set.

    At most ``factor.abs_tol`` whenever the factorization terminated by
    meeting the tolerance.
    """
    return float(np.sqrt(max(float(factor.resid_diag.max()), 0.0)))


def reconstruct(factor):
    """Dense N x N covariance R'R of the rank-m process, original point order.

    Diagnostic use: rows and columns at the knots reproduce the original
    kernel matrix, and the diagonal plus ``residual_variances`` recovers the
    original pointwise variances.
    """
    piv = factor.rows.T @ factor.rows
    inv = factor.inverse_pivot()
    return piv[np.ix_(inv, inv)]


def modified_reconstruct(factor):
    """``reconstruct`` plus the diagonal of residual variances.

    Restores the exact pointwise prior variances while leaving off-diagonal
    entries untouched.
    """
    out = reconstruct(factor)
    out[np.diag_indices_from(out)] += residual_variances(factor)
    return out


def knot_features(factor, X):
    """Rank-m feature map u(t) with u(s) . u(t) equal to the approximate kernel.

    For the fitted points this reproduces the factor rows; for new points it
    extrapolates through the knots.  Returns an (len(X), m) array.
    """
    X = factor.kernel.validate(X)
    cross = factor.kernel(factor.knot_points, X)
    L = factor.rows[:, : factor.rank]
    return solve_triangular(L, cross, trans="T", lower=False).T


class KnotSelector(TransformerMixin, BaseEstimator):
    """Tolerance-driven knot selection as a scikit-learn transformer.

    ``fit(X)`` runs the pivoted incomplete Cholesky on the rows of X;
    ``transform(X)`` maps points to the rank-m feature space in which inner
    products equal the low-rank kernel approximation, so downstream linear
    models operate on the approximating process.

    Parameters
    ----------
    kernel : Kernel
    rel_tol : float
        Relative stopping tolerance on the standard-deviation scale.
    m_max : int or None
        Rank cap (default: number of points).

    Attributes
    ----------
    factor_ : LowRankFactor
    rank_ : int
    knot_indices_ : ndarray of selected row indices, in selection order
    kappa_s_ : float
    abs_tol_ : float
    terminated_by_ : str
    """

    def __init__(self, kernel, rel_tol=1e-2, m_max=None):
        self.kernel = kernel
        self.rel_tol = rel_tol
        self.m_max = m_max

    def fit(self, X, y=None):
        factor = pivoted_ichol(self.kernel, X, rel_tol=self.rel_tol, m_max=self.m_max)
        self.factor_ = factor
        self.n_features_in_ = factor.points.shape[1]
        self.rank_ = factor.rank
        self.knot_indices_ = factor.knot_indices.copy()
        self.kappa_s_ = kappa_s(factor)
        self.abs_tol_ = factor.abs_tol
        self.terminated_by_ = factor.terminated_by
        return self

    def transform(self, X):
        if not hasattr(self, "factor_"):
            raise NotFittedError("KnotSelector must be fitted before transform")
        return knot_features(self.factor_, X)
