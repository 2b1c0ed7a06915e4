"""Sample moments consumed by the interaction estimators.

All covariance-type quantities use the divisor ``n``.  The covariance of the
design is never formed explicitly; it is carried as the economy SVD of the
centered design, ``Sigma = U diag(d) U^T`` with ``d = s**2 / n``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Raw covariates ``X`` (n x p) and response ``y`` (length n)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise ValueError(f"y has length {y.shape[0]}, expected {n}")
        bad = np.argwhere(~np.isfinite(X))
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"non-finite covariate at row {i}, column {j}")
        bad = np.flatnonzero(~np.isfinite(y))
        if bad.size:
            raise ValueError(f"non-finite response at row {bad[0]}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CenteredStats:
    """Centered design together with the spectral factors of its covariance.

    Attributes
    ----------
    xbar : (p,) sample mean of the covariates.
    ybar : sample mean of the response.
    Xc : (n, p) centered design.
    U : (p, m) orthonormal left factors, ``m = min(n, p)``.
    d : (m,) eigenvalues of the sample covariance, descending.
    """

    xbar: np.ndarray
    ybar: float
    Xc: np.ndarray
    U: np.ndarray
    d: np.ndarray

    @property
    def n(self) -> int:
        return self.Xc.shape[0]

    @property
    def p(self) -> int:
        return self.Xc.shape[1]

    def sigma(self) -> np.ndarray:
        """Dense sample covariance ``Xc^T Xc / n`` (p x p)."""
        return symmetrize(self.Xc.T @ self.Xc / self.n)

    def sigma_apply(self, B: np.ndarray) -> np.ndarray:
        """Return ``Sigma @ B @ Sigma`` using the spectral factors."""
        W = self.U.T @ B @ self.U
        W *= np.outer(self.d, self.d)
        return self.U @ W @ self.U.T


def symmetrize(A: np.ndarray) -> np.ndarray:
    """``(A + A^T) / 2``; the result is exactly symmetric."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def center(dataset: Dataset) -> CenteredStats:
    """Center the data and factor the sample covariance.

    The SVD is taken on the n x p centered design, so the p x p Gram matrix
    is never formed.  Columns with zero variance are allowed but reported.
    """
    X, y = dataset.X, dataset.y
    n, p = X.shape
    xbar = X.mean(axis=0)
    Xc = X - xbar
    ybar = float(y.mean())

    col_scale = np.abs(Xc).max(axis=0)
    flat = np.flatnonzero(col_scale <= 1e-12 * np.maximum(1.0, np.abs(xbar)))
    if flat.size:
        warnings.warn(
            f"zero-variance covariate column(s) {flat.tolist()}", RuntimeWarning,
            stacklevel=2,
        )

    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    d = s**2 / n
    U = np.ascontiguousarray(Vt.T)
    Xc.setflags(write=False)
    return CenteredStats(xbar=xbar, ybar=ybar, Xc=Xc, U=U, d=d)


def _check_y(stats: CenteredStats, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != stats.n:
        raise ValueError(f"y has length {y.shape[0]}, expected {stats.n}")
    return y


def centered_response(y: np.ndarray) -> np.ndarray:
    """``y - mean(y)``, exactly zero for a constant vector.

    The floating-point mean of equal values can miss them by an ulp, which
    would leave roundoff weights for the penalty path to chase.
    """
    if np.ptp(y) == 0.0:
        return np.zeros_like(y)
    return y - y.mean()


def weighted_second_moment(Xc: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``n^{-1} sum_i w_i x_i x_i^T`` for centered rows ``x_i``."""
    return symmetrize((Xc * w[:, None]).T @ Xc / Xc.shape[0])


def lambda_y(stats: CenteredStats, y) -> np.ndarray:
    """Response-weighted second moment ``n^{-1} sum (y_i - ybar) xc_i xc_i^T``."""
    y = _check_y(stats, y)
    return weighted_second_moment(stats.Xc, centered_response(y))


def residuals(stats: CenteredStats, y, beta) -> np.ndarray:
    """Residuals ``(y_i - ybar) - xc_i^T beta`` of a linear fit."""
    y = _check_y(stats, y)
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != stats.p:
        raise ValueError(f"beta has length {beta.shape[0]}, expected {stats.p}")
    return centered_response(y) - stats.Xc @ beta


def lambda_r(stats: CenteredStats, y, beta) -> np.ndarray:
    """Residual-weighted second moment; equals :func:`lambda_y` when beta = 0."""
    return weighted_second_moment(stats.Xc, residuals(stats, y, beta))
