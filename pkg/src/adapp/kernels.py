"""Covariance kernels over finite point sets.

Points are rows of a 2-D float array.  The leading ``coord_dim`` columns are
input coordinates; kernels that modulate variance through observed per-point
values read those values from trailing columns (each kernel's docstring gives
the exact layout it expects).  Kernels are immutable and all evaluation is
pure, so instances are safe to share across threads.
"""

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import check_points, check_scalar

__all__ = [
    "Kernel",
    "ARDSquaredExponential",
    "ScaledProjectedSE",
    "VaryingCoefficientSum",
    "canonical_distance",
]


class Kernel:
    """Base class for positive-semidefinite covariance functions psi(s, t)."""

    coord_dim = None

    def __call__(self, A, B=None):
        """Cross-covariance matrix between the rows of A and of B (A if None)."""
        raise NotImplementedError

    def diag(self, A):
        """Pointwise variances psi(t, t), one per row of A."""
        raise NotImplementedError

    def validate(self, X, name="X"):
        """Check that ``X`` is a well-formed point array for this kernel."""
        X = check_points(X, name=name)
        self._split(X, name)
        return X

    def _split(self, X, name="X"):
        """Split validated rows into coordinates and per-point values."""
        raise NotImplementedError

    # Parameter plumbing used by the samplers: every kernel exposes its
    # positive parameters as a flat vector that can be swapped wholesale.
    @property
    def param_names(self):
        """Names of the positive parameters, in ``params`` order."""
        raise NotImplementedError

    @property
    def params(self):
        """Flat copy of the positive parameter vector."""
        raise NotImplementedError

    def with_params(self, values):
        """Return a copy of this kernel with the parameter vector replaced."""
        raise NotImplementedError


def _check_param_vector(values, size, name="values"):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite entries")
    return values


class ARDSquaredExponential(Kernel):
    """Squared-exponential kernel with one inverse-lengthscale rate per axis.

        psi(s, t) = exp(-sum_j rates[j]^2 * (s_j - t_j)^2)

    The marginal variance is 1 by construction; overall scale belongs to the
    model built on top (see ``PredictiveProcessRegressor``'s ``tau2``).
    Inputs must have exactly ``len(rates)`` columns.
    """

    def __init__(self, rates):
        rates = np.atleast_1d(np.asarray(rates, dtype=float))
        if rates.ndim != 1 or rates.size == 0:
            raise ValueError("rates must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("rates must be finite and >= 0")
        self.rates = rates
        self.coord_dim = rates.size

    def _split(self, X, name="X"):
        if X.shape[1] != self.coord_dim:
            raise ValueError(
                f"{name} has {X.shape[1]} columns, kernel expects {self.coord_dim}"
            )
        return X, None

    def __call__(self, A, B=None):
        A = check_points(A, "A")
        self._split(A, "A")
        Ac = A * self.rates
        if B is None:
            Bc = Ac
        else:
            B = check_points(B, "B")
            self._split(B, "B")
            Bc = B * self.rates
        return np.exp(-cdist(Ac, Bc, "sqeuclidean"))

    def diag(self, A):
        A = self.validate(A)
        return np.ones(A.shape[0])

    @property
    def param_names(self):
        return [f"rate_{j + 1}" for j in range(self.coord_dim)]

    @property
    def params(self):
        return self.rates.copy()

    def with_params(self, values):
        return ARDSquaredExponential(_check_param_vector(values, self.coord_dim))

    def __repr__(self):
        return f"ARDSquaredExponential(rates={self.rates.tolist()})"


class ScaledProjectedSE(Kernel):
    """Squared-exponential kernel on projected coordinates with per-point scaling.

        psi(s, t) = x(s) * x(t) * exp(-decay * ||Q (s - t)||^2)

    ``projection`` (Q) must be a symmetric idempotent matrix, validated at
    construction.  Inputs may have either ``coord_dim`` columns, in which case
    the standard-deviation modulation x(t) is 1 everywhere, or
    ``coord_dim + 1`` columns with x(t) in the last column.  The pointwise
    variance is x(t)^2.
    """

    def __init__(self, decay, projection):
        self.decay = check_scalar(decay, "decay", positive=True)
        Q = np.asarray(projection, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("projection must be a square matrix")
        if not np.all(np.isfinite(Q)):
            raise ValueError("projection contains non-finite entries")
        if np.max(np.abs(Q - Q.T)) >= 1e-10:
            raise ValueError("projection must be symmetric")
        if np.max(np.abs(Q @ Q - Q)) >= 1e-10:
            raise ValueError("projection must be idempotent (Q @ Q == Q)")
        self.projection = Q
        self.coord_dim = Q.shape[0]

    def _split(self, X, name="X"):
        if X.shape[1] == self.coord_dim:
            return X, None
        if X.shape[1] == self.coord_dim + 1:
            return X[:, :-1], X[:, -1]
        raise ValueError(
            f"{name} has {X.shape[1]} columns, kernel expects {self.coord_dim} "
            f"or {self.coord_dim + 1} (with a trailing scale column)"
        )

    def __call__(self, A, B=None):
        A = check_points(A, "A")
        Ac, xa = self._split(A, "A")
        if B is None:
            Bc, xb = Ac, xa
        else:
            B = check_points(B, "B")
            Bc, xb = self._split(B, "B")
        d2 = cdist(Ac @ self.projection, Bc @ self.projection, "sqeuclidean")
        out = np.exp(-self.decay * d2)
        # apply the scale factors as one product so the result is exactly
        # symmetric in (s, t)
        if xa is not None and xb is not None:
            out *= xa[:, None] * xb[None, :]
        elif xa is not None:
            out *= xa[:, None]
        elif xb is not None:
            out *= xb[None, :]
        return out

    def diag(self, A):
        A = check_points(A, "A")
        _, x = self._split(A, "A")
        if x is None:
            return np.ones(A.shape[0])
        return x * x

    @property
    def param_names(self):
        return ["decay"]

    @property
    def params(self):
        return np.array([self.decay])

    def with_params(self, values):
        values = _check_param_vector(values, 1)
        return ScaledProjectedSE(values[0], self.projection)

    def __repr__(self):
        return f"ScaledProjectedSE(decay={self.decay!r}, projection={self.projection.tolist()})"


class VaryingCoefficientSum(Kernel):
    """Sum of squared-exponential components weighted by per-point covariates.

        psi(s, t) = sum_j scales[j]^2 * x_j(s) * x_j(t)
                                      * exp(-decays[j]^2 * ||s_c - t_c||^2)

    This is the prior covariance of omega(t) = sum_j x_j(t) * omega_j(t) for
    independent centered processes omega_j with variance ``scales[j]^2`` and
    squared-exponential correlation.  Component 0 is an intercept with
    x_0 = 1; components 1..J read x_1..x_J from the J trailing input columns
    that follow the ``coord_dim`` coordinate columns.
    """

    def __init__(self, scales, decays, coord_dim=2):
        scales = np.atleast_1d(np.asarray(scales, dtype=float))
        decays = np.atleast_1d(np.asarray(decays, dtype=float))
        if scales.ndim != 1 or scales.size == 0 or scales.shape != decays.shape:
            raise ValueError("scales and decays must be 1-D sequences of equal length >= 1")
        for arr, label in ((scales, "scales"), (decays, "decays")):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{label} must be finite and >= 0")
        coord_dim = int(coord_dim)
        if coord_dim < 1:
            raise ValueError("coord_dim must be >= 1")
        self.scales = scales
        self.decays = decays
        self.coord_dim = coord_dim

    @property
    def n_components(self):
        return self.scales.size

    @property
    def n_covariates(self):
        return self.n_components - 1

    def _split(self, X, name="X"):
        expected = self.coord_dim + self.n_covariates
        if X.shape[1] != expected:
            raise ValueError(
                f"{name} has {X.shape[1]} columns, kernel expects {expected} "
                f"({self.coord_dim} coordinates + {self.n_covariates} covariates)"
            )
        return X[:, : self.coord_dim], X[:, self.coord_dim :]

    def _covariate(self, values, j, n):
        if j == 0:
            return np.ones(n)
        return values[:, j - 1]

    def __call__(self, A, B=None):
        A = check_points(A, "A")
        Ac, xa = self._split(A, "A")
        if B is None:
            Bc, xb = Ac, xa
        else:
            B = check_points(B, "B")
            Bc, xb = self._split(B, "B")
        d2 = cdist(Ac, Bc, "sqeuclidean")
        out = np.zeros_like(d2)
        for j in range(self.n_components):
            term = self.scales[j] ** 2 * np.exp(-self.decays[j] ** 2 * d2)
            if j > 0:
                term *= np.outer(xa[:, j - 1], xb[:, j - 1])
            out += term
        return out

    def component_cross(self, j, A, B):
        """Cross-covariances Cov(omega(s), omega_j(t)) for s in A, t in B.

        Only the s side carries the covariate weight:
        Cov(omega(s), omega_j(t)) = x_j(s) scales[j]^2 exp(-decays[j]^2 ||s-t||^2).
        Returns an (len(A), len(B)) matrix.
        """
        if not 0 <= j < self.n_components:
            raise ValueError(f"component index {j} out of range")
        A = check_points(A, "A")
        Ac, xa = self._split(A, "A")
        B = check_points(B, "B")
        Bc, _ = self._split(B, "B")
        d2 = cdist(Ac, Bc, "sqeuclidean")
        out = self.scales[j] ** 2 * np.exp(-self.decays[j] ** 2 * d2)
        if j > 0:
            out *= xa[:, j - 1][:, None]
        return out

    def diag(self, A):
        A = check_points(A, "A")
        _, x = self._split(A, "A")
        out = np.full(A.shape[0], self.scales[0] ** 2)
        for j in range(1, self.n_components):
            out += self.scales[j] ** 2 * x[:, j - 1] ** 2
        return out

    @property
    def param_names(self):
        names = [f"scale_{j}" for j in range(self.n_components)]
        names += [f"decay_{j}" for j in range(self.n_components)]
        return names

    @property
    def params(self):
        return np.concatenate([self.scales, self.decays])

    def with_params(self, values):
        values = _check_param_vector(values, 2 * self.n_components)
        k = self.n_components
        return VaryingCoefficientSum(values[:k], values[k:], coord_dim=self.coord_dim)

    def __repr__(self):
        return (
            f"VaryingCoefficientSum(scales={self.scales.tolist()}, "
            f"decays={self.decays.tolist()}, coord_dim={self.coord_dim})"
        )


def canonical_distance(kernel, s, t):
    """Distance sqrt(E[(omega(s) - omega(t))^2]) induced by the kernel.

    Equals sqrt(psi(s,s) + psi(t,t) - 2 psi(s,t)), clamped at zero against
    round-off.  ``s`` and ``t`` may be single rows (returns a float) or
    equally sized stacks of rows (returns the paired distances).
    """
    s = kernel.validate(s, "s")
    t = kernel.validate(t, "t")
    if s.shape[0] != t.shape[0]:
        raise ValueError("s and t must contain the same number of points")
    vs = kernel.diag(s)
    vt = kernel.diag(t)
    cross = np.diagonal(kernel(s, t))
    out = np.sqrt(np.maximum(0.0, vs + vt - 2.0 * cross))
    if out.size == 1:
        return float(out[0])
    return out
