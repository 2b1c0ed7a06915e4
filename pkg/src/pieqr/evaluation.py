"""Accuracy metrics, the oracle refit, the all-pairs-LASSO baseline and a
brute-force solver for small instances.

Metrics look at the lower triangle (``l <= k``) and count exact nonzeros.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .main_effects import _LassoProblem, fold_assignment, lasso_grid
from .moments import Dataset, symmetrize
from .tuning import PathResult, QuadraticModel, bic_path, bic_select, refit_ls

ALL_PAIRS_MAX_P = 300
BRUTE_FORCE_MAX_P = 6


@dataclass
class MetricReport:
    rate: float
    loss: float
    size: int
    time_seconds: float = 0.0


def _lower_nonzero(A) -> np.ndarray:
    return np.tril(np.asarray(A) != 0.0)


def support_rate(est, truth) -> float:
    """Percentage of true lower-triangle nonzeros that are nonzero in ``est``."""
    t = _lower_nonzero(truth)
    if not t.any():
        raise ValueError("truth has no nonzero interaction")
    hit = t & _lower_nonzero(est)
    return 100.0 * hit.sum() / t.sum()


def frobenius_loss(est, truth) -> float:
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    return float(np.linalg.norm(est - truth))


def support_size(est) -> int:
    return int(_lower_nonzero(est).sum())


def metrics(est, truth, time_seconds: float = 0.0) -> MetricReport:
    return MetricReport(
        rate=support_rate(est, truth),
        loss=frobenius_loss(est, truth),
        size=support_size(est),
        time_seconds=time_seconds,
    )


def oracle_fit(dataset: Dataset, true_support, true_main_support=(), truth=None):
    """Least squares on the true supports.

    Returns ``(MetricReport, QuadraticModel)``; ``truth`` defaults to a
    matrix carrying only the support pattern, which is enough for rate and
    size but makes the loss meaningless.
    """
    t0 = time.perf_counter()
    refit = refit_ls(dataset, true_support, true_main_support)
    model = refit.to_model(dataset.X.mean(axis=0))
    elapsed = time.perf_counter() - t0
    if truth is None:
        truth = np.zeros((dataset.p, dataset.p))
        for k, l in refit.pairs:
            truth[k, l] = truth[l, k] = 1.0
    return metrics(model.omega, truth, elapsed), model


# -- all-pairs-LASSO --------------------------------------------------------

def pair_index(p: int) -> list[tuple[int, int]]:
    """Column order of the expanded design: ``(k, l)`` for ``l <= k``, row-major."""
    return [(k, l) for k in range(p) for l in range(k + 1)]


def expanded_design(X) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Main-effect columns followed by centered products of centered covariates."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    Xc = X - X.mean(axis=0)
    pairs = pair_index(p)
    kk = np.array([k for k, _ in pairs], dtype=int)
    ll = np.array([l for _, l in pairs], dtype=int)
    Zp = Xc[:, kk] * Xc[:, ll]
    Z = np.hstack([Xc, Zp - Zp.mean(axis=0)])
    return Z, pairs


def _fold_pairs(coef, p, pairs) -> tuple[np.ndarray, np.ndarray]:
    beta = coef[:p].copy()
    B = np.zeros((p, p))
    for c, (k, l) in zip(coef[p:], pairs):
        if k == l:
            B[k, k] = c
        else:
            B[k, l] = B[l, k] = c / 2.0
    return beta, B


class AllPairsLasso:
    """LASSO on all main effects and all distinct pairwise products.

    With ``standardize`` the penalty applies to coefficients of unit-variance
    columns (glmnet's default); returned coefficients are on the original
    scale.  Off-diagonal product coefficients ``c`` are folded into the
    symmetric matrix as ``B_kl = B_lk = c / 2``.
    """

    def __init__(self, dataset: Dataset, standardize: bool = True, tol: float = 1e-10):
        p = dataset.p
        if p > ALL_PAIRS_MAX_P:
            raise ValueError(
                f"all-pairs-LASSO needs p + p(p+1)/2 = {p + p * (p + 1) // 2} columns; "
                f"p = {p} exceeds the guard of {ALL_PAIRS_MAX_P}"
            )
        self.p = p
        self.y = dataset.y
        self.standardize = standardize
        self.tol = tol
        self.Z, self.pairs = expanded_design(dataset.X)
        self.scale = self._scale(self.Z)
        self.problem = _LassoProblem(self.Z / self.scale, self.y - self.y.mean(), form="residual")

    def _scale(self, Zc):
        if not self.standardize:
            return np.ones(Zc.shape[1])
        scale = np.sqrt((Zc**2).mean(axis=0))
        scale[scale == 0.0] = 1.0
        return scale

    def lambda_max(self) -> float:
        return self.problem.lambda_max()

    def solve(self, lam, warm=None):
        w, _, ok = self.problem.solve(lam, warm, tol=self.tol)
        return w, ok

    def path(self, lambdas) -> np.ndarray:
        W = np.zeros((len(lambdas), self.problem.p))
        w = None
        for k, lam in enumerate(lambdas):
            w, _ = self.solve(lam, w)
            W[k] = w
        return W

    def unpack(self, w):
        return _fold_pairs(w / self.scale, self.p, self.pairs)

    def cross_validate(self, lambdas, folds: int = 10, seed: int = 0) -> np.ndarray:
        """Held-out mean squared error, shape (folds, len(lambdas)).

        Columns are re-centered and re-scaled on each training fold.
        """
        n = self.Z.shape[0]
        if n < folds:
            raise ValueError(f"n = {n} is smaller than folds = {folds}")
        labels = fold_assignment(n, folds, seed)
        err = np.zeros((folds, len(lambdas)))
        for f in range(folds):
            test = labels == f
            zbar = self.Z[~test].mean(axis=0)
            Zc = self.Z[~test] - zbar
            scale = self._scale(Zc)
            ytr = self.y[~test]
            prob = _LassoProblem(Zc / scale, ytr - ytr.mean(), form="residual")
            W = np.zeros((len(lambdas), prob.p))
            w = None
            for k, lam in enumerate(lambdas):
                w, _, _ = prob.solve(lam, w, tol=self.tol)
                W[k] = w
            pred = ytr.mean() + ((self.Z[test] - zbar) / scale) @ W.T
            err[f] = ((self.y[test][:, None] - pred) ** 2).mean(axis=0)
        return err


def all_pairs_lasso(dataset: Dataset, lam: float, standardize: bool = True):
    """Fit the all-pairs-LASSO at one penalty; returns ``(beta, B)``."""
    apl = AllPairsLasso(dataset, standardize)
    w, _ = apl.solve(lam)
    return apl.unpack(w)


def penalized_model(dataset, beta, B) -> QuadraticModel:
    """Quadratic model carrying penalized (not refit) coefficients."""
    xbar = dataset.X.mean(axis=0)
    Xc = dataset.X - xbar
    # products enter the fit centered, so the intercept absorbs their means
    alpha = dataset.y.mean() - float(np.sum(B * (Xc.T @ Xc / dataset.n)))
    return QuadraticModel(alpha=alpha, beta=beta, omega=B, mu=xbar)


def fit_all_pairs(dataset: Dataset, tuning: str = "cv", grid_points: int = 50,
                  grid_ratio: float = 0.01, folds: int = 10, seed: int = 0,
                  rule: str = "1se", standardize: bool = True):
    """All-pairs-LASSO baseline over a warm-started penalty path.

    ``tuning="cv"`` picks the penalty by k-fold cross-validation (``rule``
    "min" or "1se", the largest penalty within one standard error of the
    minimum) and returns the LASSO coefficients.  ``tuning="bic"`` applies
    the least-squares refit and BIC used by the PIE pipelines, refitting
    each path point on its own main effects and pairs.

    Returns ``(QuadraticModel, PathResult)``.
    """
    apl = AllPairsLasso(dataset, standardize)
    lambdas = lasso_grid(apl.lambda_max(), grid_points, grid_ratio)
    W = apl.path(lambdas)
    fits = [apl.unpack(w) for w in W]
    supports, mains = [], []
    for beta, B in fits:
        k, l = np.nonzero(np.tril(B))
        supports.append(list(zip(k.tolist(), l.tolist())))
        mains.append(np.flatnonzero(beta).tolist())

    if tuning == "cv":
        err = apl.cross_validate(lambdas, folds, seed)
        cvm = err.mean(axis=0)
        best = int(np.flatnonzero(cvm == cvm.min())[0])
        if rule == "1se":
            cvse = err.std(axis=0, ddof=1) / np.sqrt(folds)
            best = int(np.flatnonzero(cvm <= cvm[best] + cvse[best])[0])
        elif rule != "min":
            raise ValueError(f"unknown rule {rule!r}")
        path = PathResult(
            lambdas=lambdas, fits=fits, supports=supports, main_support=mains[best],
            refit_rss=np.full(len(lambdas), np.nan),
            df=np.array([len(s) + len(m) + 1 for s, m in zip(supports, mains)]),
            admissible=np.ones(len(lambdas), dtype=bool),
            chosen_index=best, cv_error=cvm,
        )
        return penalized_model(dataset, *fits[best]), path
    if tuning != "bic":
        raise ValueError(f"unknown tuning {tuning!r}")

    # main supports vary along the path, so each point is refit separately
    paths = [bic_path(dataset, [lam], [fit], [sup], main, select=False)
             for lam, fit, sup, main in zip(lambdas, fits, supports, mains)]
    path = PathResult(
        lambdas=lambdas,
        fits=fits,
        supports=[pp.supports[0] for pp in paths],
        main_support=[],
        refit_rss=np.array([pp.refit_rss[0] for pp in paths]),
        df=np.array([pp.df[0] for pp in paths]),
        admissible=np.array([pp.admissible[0] for pp in paths]),
        refits=[pp.refits[0] for pp in paths],
    )
    yc = dataset.y - dataset.y.mean()
    bic_select(path, dataset.n, tss=float(yc @ yc))
    path.main_support = mains[path.chosen_index]
    model = path.refits[path.chosen_index].to_model(dataset.X.mean(axis=0))
    return model, path


# -- brute-force oracle -------------------------------------------------------

def pie_vec_objective(b, H, lam_vec, lam) -> float:
    return float(0.5 * b @ H @ b - lam_vec @ b + lam * np.abs(b).sum())


def brute_force_pie(SigmaHat, LambdaHat, lam: float, max_iter: int = 1_000_000,
                    tol: float = 1e-12) -> np.ndarray:
    """Solve the vectorized problem

        1/2 vec(B)^T (2 S kron S) vec(B) - vec(Lam)^T vec(B) + lam ||vec(B)||_1

    by accelerated proximal gradient with adaptive restart.  Intended as an
    independent check for small ``p``.
    """
    S = np.asarray(SigmaHat, dtype=float)
    p = S.shape[0]
    if p > BRUTE_FORCE_MAX_P:
        raise ValueError(f"brute force is limited to p <= {BRUTE_FORCE_MAX_P}, got {p}")
    H = 2.0 * np.kron(S, S)
    c = np.asarray(LambdaHat, dtype=float).reshape(-1)
    Lip = float(np.linalg.eigvalsh(H).max())
    if Lip <= 0:
        Lip = 1.0
    step = 1.0 / Lip

    def prox(v):
        return np.sign(v) * np.maximum(np.abs(v) - step * lam, 0.0)

    x = np.zeros(p * p)
    yk = x.copy()
    t = 1.0
    scale = max(1.0, float(np.abs(c).max()))
    for _ in range(max_iter):
        g = H @ yk - c
        x_new = prox(yk - step * g)
        # gradient-mapping norm at yk is the first-order optimality gap
        if Lip * np.abs(x_new - yk).max() <= tol * scale:
            x = x_new
            break
        if (yk - x_new) @ (x_new - x) > 0:
            t = 1.0  # restart momentum
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        yk = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
    return symmetrize(x.reshape(p, p))
