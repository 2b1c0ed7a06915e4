"""LASSO estimation of the main-effect vector.

The objective solved by :func:`fit_lasso` is

    (2n)^{-1} ||yc - Xc b||^2 + lam * ||b||_1

on centered data, by cyclic coordinate descent.  Two kernels are provided:
the covariance form keeps the p x p Gram matrix and is used for p < 5000;
the residual form keeps an n-vector of residuals and is used otherwise (and
by the all-pairs baseline, whose expanded design is wide).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .moments import CenteredStats

COVARIANCE_FORM_MAX_P = 5000


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _cd_covariance(G, c, lam, b, max_sweeps, tol):
    p = c.shape[0]
    grad = c - G @ b
    for sweep in range(max_sweeps):
        max_step = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = b[j]
            new = _soft(grad[j] + gjj * old, lam) / gjj
            if new != old:
                delta = new - old
                for k in range(p):
                    grad[k] -= delta * G[k, j]
                b[j] = new
                step = abs(delta) * np.sqrt(gjj)
                if step > max_step:
                    max_step = step
        if max_step < tol:
            return sweep + 1, True
    return max_sweeps, False


@njit(cache=True)
def _sweep_residual(Z, r, colsq, lam, b, idx):
    n = Z.shape[0]
    max_step = 0.0
    for jj in range(idx.shape[0]):
        j = idx[jj]
        cj = colsq[j]
        if cj <= 0.0:
            continue
        z = 0.0
        for i in range(n):
            z += Z[i, j] * r[i]
        old = b[j]
        new = _soft(z / n + cj * old, lam) / cj
        if new != old:
            delta = new - old
            for i in range(n):
                r[i] -= delta * Z[i, j]
            b[j] = new
            step = abs(delta) * np.sqrt(cj)
            if step > max_step:
                max_step = step
    return max_step


@njit(cache=True)
def _cd_residual(Z, yc, colsq, lam, b, max_sweeps, tol):
    # glmnet-style: a full sweep, then iterate on the active set to convergence.
    p = Z.shape[1]
    r = yc - Z @ b
    everything = np.arange(p)
    sweeps = 0
    while sweeps < max_sweeps:
        step = _sweep_residual(Z, r, colsq, lam, b, everything)
        sweeps += 1
        if step < tol:
            return sweeps, True
        active = np.flatnonzero(b != 0.0)
        while sweeps < max_sweeps:
            step = _sweep_residual(Z, r, colsq, lam, b, active)
            sweeps += 1
            if step < tol:
                break
    return sweeps, False


@dataclass
class MainEffectsFit:
    """Result of a LASSO fit for the main effects.

    ``beta`` and ``intercept`` are on the original covariate scale.  When the
    fit came from :func:`select_lasso`, ``lambdas`` and ``cv_error`` hold the
    tuning path and ``lambda_`` is on the (possibly standardized) scale the
    penalty was applied in.
    """

    beta: np.ndarray
    intercept: float
    lambda_: float
    converged: bool = True
    kkt_residual: float = 0.0
    sweeps: int = 0
    lambdas: np.ndarray | None = None
    cv_error: np.ndarray | None = None
    standardized: bool = False
    scale: np.ndarray | None = field(default=None, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta != 0.0)


class _LassoProblem:
    """Centered (optionally scaled) least-squares data in the form CD needs."""

    def __init__(self, Xc, yc, form=None):
        self.Xc = np.asfortranarray(Xc, dtype=float)
        self.yc = np.ascontiguousarray(yc, dtype=float)
        n, p = self.Xc.shape
        self.n, self.p = n, p
        if form is None:
            form = "covariance" if p < COVARIANCE_FORM_MAX_P else "residual"
        self.form = form
        self.c = self.Xc.T @ self.yc / n
        self.colsq = np.einsum("ij,ij->j", self.Xc, self.Xc) / n
        self.G = self.Xc.T @ self.Xc / n if form == "covariance" else None

    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.c))) if self.p else 0.0

    def gradient(self, b):
        # n^{-1} Xc^T (yc - Xc b)
        if self.G is not None:
            return self.c - self.G @ b
        return self.Xc.T @ (self.yc - self.Xc @ b) / self.n

    def objective(self, b, lam) -> float:
        r = self.yc - self.Xc @ b
        return float(r @ r / (2 * self.n) + lam * np.abs(b).sum())

    def kkt(self, b, lam) -> float:
        g = self.gradient(b)
        nz = b != 0.0
        # zero-variance columns have g = 0 and are held at 0
        res = np.where(nz, np.abs(g - lam * np.sign(b)), np.maximum(np.abs(g) - lam, 0.0))
        return float(res.max()) if res.size else 0.0

    def solve(self, lam, b0=None, max_sweeps=100_000, tol=1e-12):
        b = np.zeros(self.p) if b0 is None else np.array(b0, dtype=float)
        if self.form == "covariance":
            sweeps, ok = _cd_covariance(self.G, self.c, float(lam), b, max_sweeps, tol)
        else:
            sweeps, ok = _cd_residual(self.Xc, self.yc, self.colsq, float(lam), b, max_sweeps, tol)
        return b, int(sweeps), bool(ok)


def _kkt_tolerance(lam: float) -> float:
    return 1e-6 * max(lam, 1.0)


def fit_lasso(stats: CenteredStats, y, lam: float, beta0=None, max_sweeps: int = 100_000,
              tol: float = 1e-12) -> MainEffectsFit:
    """Minimize ``(2n)^{-1} sum (y_i - ybar - xc_i^T b)^2 + lam ||b||_1``.

    Parameters
    ----------
    stats : CenteredStats
        Output of :func:`pieqr.moments.center`.
    y : array_like, shape (n,)
    lam : float
        Penalty level, ``lam >= 0``.
    beta0 : array_like, optional
        Warm start.
    max_sweeps : int
        Cap on full coordinate sweeps.  If reached, the returned fit has
        ``converged=False`` and carries the last iterate.
    tol : float
        Coordinate-change tolerance (scaled by column norm).

    Returns
    -------
    MainEffectsFit
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != stats.n:
        raise ValueError(f"y has length {y.shape[0]}, expected {stats.n}")
    prob = _LassoProblem(stats.Xc, y - y.mean())
    beta, sweeps, ok = prob.solve(lam, beta0, max_sweeps=max_sweeps, tol=tol)
    kkt = prob.kkt(beta, lam)
    converged = ok and kkt <= _kkt_tolerance(lam)
    return MainEffectsFit(
        beta=beta,
        intercept=float(y.mean() - stats.xbar @ beta),
        lambda_=float(lam),
        converged=converged,
        kkt_residual=kkt,
        sweeps=sweeps,
    )


def lasso_grid(lam_max: float, n_points: int = 50, ratio: float = 0.01) -> np.ndarray:
    """Descending log-spaced grid from ``lam_max`` to ``ratio * lam_max``."""
    if lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, ratio * lam_max, n_points)


def _prepare(X, y, standardize):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    xbar = X.mean(axis=0)
    Xc = X - xbar
    if standardize:
        scale = np.sqrt((Xc**2).mean(axis=0))
        scale[scale == 0.0] = 1.0
        Xc = Xc / scale
    else:
        scale = np.ones(X.shape[1])
    return Xc, y - y.mean(), xbar, y.mean(), scale


def lasso_path(X, y, lambdas, standardize: bool = False):
    """Warm-started coefficients along ``lambdas`` (internal scale).

    Returns an array of shape (len(lambdas), p) of coefficients on the scale
    of the (possibly standardized) centered design.
    """
    Xc, yc, _, _, _ = _prepare(X, y, standardize)
    return _warm_path(_LassoProblem(Xc, yc), lambdas)


def _warm_path(prob, lambdas):
    out = np.zeros((len(lambdas), prob.p))
    b = None
    for k, lam in enumerate(lambdas):
        b, _, _ = prob.solve(lam, b)
        out[k] = b
    return out


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label per observation; a seeded permutation dealt round-robin."""
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % folds
    return labels


def select_lasso(stats: CenteredStats, y, folds: int = 10, seed: int = 0,
                 n_lambda: int = 50, ratio: float = 0.01,
                 standardize: bool = True) -> MainEffectsFit:
    """Tune the LASSO penalty by k-fold cross-validated squared error.

    The grid runs from the smallest penalty that zeroes every coefficient
    down to ``ratio`` times that value.  Each training fold is re-centered
    (and re-scaled when ``standardize``) on its own rows.  The chosen
    penalty minimizes the pooled held-out squared error, ties going to the
    larger penalty.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    y = np.asarray(y, dtype=float).ravel()
    n = stats.n
    if n < folds:
        raise ValueError(f"n = {n} is smaller than folds = {folds}")
    X = stats.Xc  # re-centering is a no-op on the full sample
    Xs, yc, _, ybar, scale = _prepare(X, y, standardize)
    full = _LassoProblem(Xs, yc)
    lambdas = lasso_grid(full.lambda_max(), n_lambda, ratio)

    labels = fold_assignment(n, folds, seed)
    sq_err = np.zeros(len(lambdas))
    for f in range(folds):
        test = labels == f
        Xtr, ytr, xbar_tr, ybar_tr, scale_tr = _prepare(X[~test], y[~test], standardize)
        coefs = _warm_path(_LassoProblem(Xtr, ytr), lambdas) / scale_tr
        pred = ybar_tr + (X[test] - xbar_tr) @ coefs.T
        sq_err += ((y[test][:, None] - pred) ** 2).sum(axis=0)
    cv_error = sq_err / n
    best = int(np.flatnonzero(cv_error == cv_error.min())[0])

    b = None
    for lam in lambdas[: best + 1]:
        b, sweeps, ok = full.solve(lam, b)
    lam = float(lambdas[best])
    kkt = full.kkt(b, lam)
    beta = b / scale
    return MainEffectsFit(
        beta=beta,
        intercept=float(ybar - stats.xbar @ beta),
        lambda_=lam,
        converged=ok and kkt <= _kkt_tolerance(lam),
        kkt_residual=kkt,
        sweeps=sweeps,
        lambdas=lambdas,
        cv_error=cv_error,
        standardized=standardize,
        scale=scale,
    )
