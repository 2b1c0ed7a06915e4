"""Penalty paths, least-squares refit, BIC selection and the PIE pipelines.

The penalized solve is used only to pick a support; coefficients come from
an ordinary least-squares refit on that support.  A refit design has an
intercept, the centered covariates of the chosen main effects and the
products of centered covariates for each interaction pair ``(k, l)`` with
``l <= k``.  Indices are zero-based throughout the library.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .admm import InteractionFit, SolverOptions, solve_pie
from .main_effects import select_lasso
from .moments import CenteredStats, Dataset, center, lambda_r, lambda_y

log = logging.getLogger(__name__)


class RankDeficientError(ValueError):
    """Refit design is rank deficient or has too many columns."""


class NoAdmissibleFitError(RuntimeError):
    pass


@dataclass
class QuadraticModel:
    """``E(Y|x) = alpha + (x - mu)^T beta + (x - mu)^T omega (x - mu)``."""

    alpha: float
    beta: np.ndarray
    omega: np.ndarray
    mu: np.ndarray

    def predict(self, X) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(X, dtype=float)) - self.mu
        return self.alpha + Z @ self.beta + np.einsum("ij,jk,ik->i", Z, self.omega, Z)


@dataclass
class Refit:
    coefficients: np.ndarray
    rss: float
    df: int
    pairs: list[tuple[int, int]]
    main: list[int]

    def to_model(self, xbar: np.ndarray) -> QuadraticModel:
        p = xbar.shape[0]
        beta = np.zeros(p)
        omega = np.zeros((p, p))
        coef = self.coefficients
        nm = len(self.main)
        beta[self.main] = coef[1 : 1 + nm]
        for c, (k, l) in zip(coef[1 + nm :], self.pairs):
            if k == l:
                omega[k, k] = c
            else:
                omega[k, l] = omega[l, k] = c / 2.0
        return QuadraticModel(alpha=float(coef[0]), beta=beta, omega=omega, mu=xbar.copy())


@dataclass
class PathResult:
    """One row per penalty level; ``chosen_index`` is the selected one.

    Selection is by BIC over admissible refits; ``cv_error`` is filled only
    when a baseline was tuned by cross-validation instead.
    """

    lambdas: np.ndarray
    fits: list
    supports: list[list[tuple[int, int]]]
    main_support: list[int]
    refit_rss: np.ndarray
    df: np.ndarray
    admissible: np.ndarray
    bic: np.ndarray = field(default=None)
    chosen_index: int = -1
    refits: list = field(default_factory=list, repr=False)
    cv_error: np.ndarray | None = None

    @property
    def chosen_fit(self):
        return self.fits[self.chosen_index]


@dataclass
class PIEOptions:
    """Configuration shared by :func:`fit_piey` and :func:`fit_pier`.

    ``lambda_`` fixes a single penalty instead of a grid.  ``beta`` forces
    the main-effect estimate used for residuals (PIEr) and refit columns.
    ``refit_main=None`` means the method default: no main columns for
    PIEy, the LASSO-selected ones for PIEr.  ``max_df`` caps the refit
    column count of an admissible penalty; ``None`` means ``n // 2``.
    """

    solver: SolverOptions = field(default_factory=SolverOptions)
    lambda_: float | None = None
    grid_points: int = 50
    grid_ratio: float = 0.01
    folds: int = 10
    seed: int = 0
    refit_main: bool | None = None
    beta: np.ndarray | None = None
    warm_start: bool = True
    max_df: int | None = None


def default_max_df(n: int) -> int:
    """Largest admissible refit size: half the sample.

    Refits close to ``n`` columns nearly interpolate the response, and the
    log(rss) term of BIC then rewards them without bound.
    """
    return max(n // 2, 1)


def normalize_pairs(pairs: Iterable[Sequence[int]]) -> list[tuple[int, int]]:
    """Pairs as sorted, de-duplicated ``(k, l)`` with ``l <= k``."""
    return sorted({(max(int(a), int(b)), min(int(a), int(b))) for a, b in pairs})


def lambda_grid(LambdaHat, n_points: int = 50, ratio: float = 0.01) -> np.ndarray:
    """Log-spaced descending grid from ``||Lam||_inf`` to ``ratio`` times it."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    lam_max = float(np.abs(LambdaHat).max())
    if lam_max == 0.0:
        warnings.warn("moment matrix is zero; using the single penalty 0", RuntimeWarning,
                      stacklevel=2)
        return np.zeros(1)
    return np.geomspace(lam_max, ratio * lam_max, n_points)


def refit_design(Xc: np.ndarray, pairs, main) -> np.ndarray:
    n = Xc.shape[0]
    cols = [np.ones(n)]
    cols += [Xc[:, k] for k in main]
    cols += [Xc[:, k] * Xc[:, l] for k, l in pairs]
    return np.column_stack(cols)


def refit_ls(dataset: Dataset, support, main_support=(), stats: CenteredStats | None = None,
             max_df: int | None = None) -> Refit:
    """Ordinary least squares on the given interaction and main supports.

    Raises
    ------
    RankDeficientError
        If the design has at least ``n`` columns, more than ``max_df``
        columns, or is not of full column rank.
    """
    Xc = stats.Xc if stats is not None else dataset.X - dataset.X.mean(axis=0)
    y = dataset.y
    n = y.shape[0]
    pairs = normalize_pairs(support)
    main = sorted({int(k) for k in main_support})
    df = 1 + len(main) + len(pairs)
    if df >= n:
        raise RankDeficientError(f"{df} refit columns for n = {n} observations")
    if max_df is not None and df > max_df:
        raise RankDeficientError(f"{df} refit columns exceeds the cap {max_df}")
    Z = refit_design(Xc, pairs, main)
    coef, _, rank, _ = np.linalg.lstsq(Z, y, rcond=None)
    if rank < df:
        raise RankDeficientError(f"refit design has rank {rank} < {df} columns")
    resid = y - Z @ coef
    return Refit(coefficients=coef, rss=float(resid @ resid), df=df, pairs=pairs, main=main)


def bic_values(rss, df, n: int, tss: float | None = None) -> np.ndarray:
    """``n log(rss / n) + log(n) df``.

    Residual sums below ``1e-12 * tss`` are floored there so exact fits do
    not produce ``-inf``.
    """
    rss = np.asarray(rss, dtype=float)
    floor = 1e-12 * tss if tss else np.finfo(float).tiny
    return n * np.log(np.maximum(rss, floor) / n) + np.log(n) * np.asarray(df, dtype=float)


def bic_select(path: PathResult, n: int, tss: float | None = None) -> int:
    """Index minimizing BIC among admissible penalties; ties go to the larger penalty."""
    ok = np.asarray(path.admissible, dtype=bool)
    if not ok.any():
        raise NoAdmissibleFitError(
            "no admissible penalty on the path; use a denser grid or a larger grid ratio"
        )
    bic = np.full(len(ok), np.inf)
    bic[ok] = bic_values(np.asarray(path.refit_rss)[ok], np.asarray(path.df)[ok], n, tss)
    path.bic = bic
    # lambdas are descending, so the first minimizer has the largest penalty
    path.chosen_index = int(np.flatnonzero(bic == bic[ok].min())[0])
    return path.chosen_index


def bic_path(dataset: Dataset, lambdas, fits, supports, main_support=(),
             stats: CenteredStats | None = None, max_df: int | None = None,
             select: bool = True) -> PathResult:
    """Refit every support on the path and pick one by BIC.

    ``max_df=None`` applies :func:`default_max_df`; pass ``n`` to keep
    every full-rank refit.  With ``select=False`` only the refits are
    filled in.
    """
    if max_df is None:
        max_df = default_max_df(dataset.n)
    main = sorted({int(k) for k in main_support})
    cache: dict[tuple, Refit | None] = {}
    rss, dfs, ok, refits = [], [], [], []
    for sup in supports:
        key = tuple(normalize_pairs(sup))
        if key not in cache:
            try:
                cache[key] = refit_ls(dataset, key, main, stats=stats, max_df=max_df)
            except RankDeficientError as exc:
                log.debug("inadmissible support of size %d: %s", len(key), exc)
                cache[key] = None
        r = cache[key]
        refits.append(r)
        ok.append(r is not None)
        rss.append(r.rss if r is not None else np.nan)
        dfs.append(r.df if r is not None else 1 + len(main) + len(key))
    path = PathResult(
        lambdas=np.asarray(lambdas, dtype=float),
        fits=list(fits),
        supports=[normalize_pairs(s) for s in supports],
        main_support=main,
        refit_rss=np.array(rss),
        df=np.array(dfs),
        admissible=np.array(ok),
        refits=refits,
    )
    if select:
        yc = dataset.y - dataset.y.mean()
        bic_select(path, dataset.n, tss=float(yc @ yc))
    return path


def solve_path(stats: CenteredStats, LambdaHat, lambdas, solver: SolverOptions,
               warm_start: bool = True) -> list[InteractionFit]:
    fits = []
    prev = None
    for lam in lambdas:
        fit = solve_pie(stats, LambdaHat, lam, solver, warm_start=prev if warm_start else None)
        fits.append(fit)
        prev = fit
    return fits


def _penalties(LambdaHat, opts: PIEOptions) -> np.ndarray:
    if opts.lambda_ is not None:
        if opts.lambda_ < 0:
            raise ValueError("lambda must be nonnegative")
        return np.array([float(opts.lambda_)])
    return lambda_grid(LambdaHat, opts.grid_points, opts.grid_ratio)


def _pie_pipeline(dataset, stats, LambdaHat, main_support, opts):
    lambdas = _penalties(LambdaHat, opts)
    fits = solve_path(stats, LambdaHat, lambdas, opts.solver, opts.warm_start)
    path = bic_path(dataset, lambdas, fits, [f.support for f in fits], main_support, stats,
                    max_df=opts.max_df)
    model = path.refits[path.chosen_index].to_model(stats.xbar)
    return model, path


def _main_estimate(stats, y, opts):
    if opts.beta is not None:
        beta = np.asarray(opts.beta, dtype=float).ravel()
        if beta.shape[0] != stats.p:
            raise ValueError(f"beta has length {beta.shape[0]}, expected {stats.p}")
        return beta
    return select_lasso(stats, y, folds=opts.folds, seed=opts.seed).beta


def fit_piey(dataset: Dataset, opts: PIEOptions | None = None):
    """Response-based estimator.

    Returns ``(QuadraticModel, PathResult)``.  The refit uses no main-effect
    columns unless ``opts.refit_main`` is set, in which case the support of
    the LASSO (or forced) main-effect estimate is included.
    """
    opts = opts or PIEOptions()
    stats = center(dataset)
    LambdaHat = lambda_y(stats, dataset.y)
    main = []
    if opts.refit_main:
        main = np.flatnonzero(_main_estimate(stats, dataset.y, opts)).tolist()
    return _pie_pipeline(dataset, stats, LambdaHat, main, opts)


def fit_pier(dataset: Dataset, opts: PIEOptions | None = None):
    """Residual-based estimator.

    The main effects are estimated by cross-validated LASSO (or taken from
    ``opts.beta``); the moment matrix is built from the residuals and the
    refit includes the selected main-effect columns unless
    ``opts.refit_main`` is ``False``.
    """
    opts = opts or PIEOptions()
    stats = center(dataset)
    beta = _main_estimate(stats, dataset.y, opts)
    LambdaHat = lambda_r(stats, dataset.y, beta)
    main = [] if opts.refit_main is False else np.flatnonzero(beta).tolist()
    return _pie_pipeline(dataset, stats, LambdaHat, main, opts)
