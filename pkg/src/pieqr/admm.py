"""ADMM for the penalized interaction objective

    f(B) = tr(B^T S B S) - tr(B Lam) + lam * ||B||_1,

where ``S`` is the sample covariance and ``Lam`` a weighted second moment.
The smooth part is split from the l1 part with the constraint ``B = Psi``;
the B-update is a Sylvester-type equation solved in closed form from the
spectral factors of ``S``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .moments import CenteredStats, symmetrize


@dataclass(frozen=True)
class SolverOptions:
    rho: float = 1.0
    tol: float = 1e-4
    max_iter: int = 1000

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass
class InteractionFit:
    """Output of :func:`solve_pie`.

    ``omega`` is the thresholded iterate and is exactly sparse.  ``B`` and
    ``L`` are kept so a neighbouring penalty can be warm-started.
    """

    omega: np.ndarray
    lambda_: float
    iterations: int
    primal_residuals: list[float]
    dual_residuals: list[float]
    converged: bool
    kkt_residual: float
    seconds: float = 0.0
    B: np.ndarray | None = field(default=None, repr=False)
    L: np.ndarray | None = field(default=None, repr=False)

    @property
    def support(self) -> list[tuple[int, int]]:
        """Zero-based ``(k, l)`` pairs with ``l <= k`` where omega is nonzero."""
        k, l = np.nonzero(np.tril(self.omega))
        return list(zip(k.tolist(), l.tolist()))

    def per_iteration_seconds(self) -> float:
        return self.seconds / max(self.iterations, 1)


def soft_threshold(A, t: float) -> np.ndarray:
    """Entrywise ``sign(a) * max(|a| - t, 0)`` with exact zeros."""
    A = np.asarray(A, dtype=float)
    return np.sign(A) * np.maximum(np.abs(A) - t, 0.0)


def _d_weights(d: np.ndarray, rho: float) -> np.ndarray:
    dd = 2.0 * np.outer(d, d)
    return dd / (dd + rho)


def b_step(LambdaK, stats: CenteredStats, rho: float, D=None) -> np.ndarray:
    """Solve ``2 S B S + rho B = LambdaK`` for B.

    With ``S = U diag(d) U^T`` and ``D_kl = 2 d_k d_l / (2 d_k d_l + rho)``
    the solution is ``(LambdaK - U (D o U^T LambdaK U) U^T) / rho``; cost is
    O(min(n, p) p^2).  ``D`` may be passed precomputed.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    U = stats.U
    if D is None:
        D = _d_weights(stats.d, rho)
    M = U.T @ LambdaK @ U
    M *= D
    B = (LambdaK - U @ M @ U.T) / rho
    # the triple product is symmetric only up to roundoff
    return symmetrize(B)


def pie_objective(B, stats: CenteredStats, LambdaHat, lam: float) -> float:
    """``tr(B^T S B S) - tr(B Lam) + lam ||B||_1``."""
    B = np.asarray(B, dtype=float)
    smooth = float(np.sum(stats.sigma_apply(B) * B))
    return smooth - float(np.sum(B * LambdaHat.T)) + lam * float(np.abs(B).sum())


def kkt_residual(B, stats: CenteredStats, LambdaHat, lam: float) -> float:
    """Largest violation of the subgradient optimality conditions at ``B``.

    With ``G = 2 S B S - Lam``: ``|G + lam sign(B)|`` on the support and
    ``max(0, |G| - lam)`` off it.
    """
    B = np.asarray(B, dtype=float)
    G = 2.0 * stats.sigma_apply(B) - LambdaHat
    res = np.where(B != 0.0, np.abs(G + lam * np.sign(B)), np.maximum(np.abs(G) - lam, 0.0))
    return float(res.max())


def kkt_tolerance(LambdaHat, lam: float) -> float:
    return 1e-3 * max(lam, float(np.abs(LambdaHat).max()))


def solve_pie(stats: CenteredStats, LambdaHat, lam: float, opts: SolverOptions | None = None,
              warm_start: InteractionFit | None = None, check_symmetry: bool = False,
              stop_below: float | None = None) -> InteractionFit:
    """Minimize the penalized interaction objective by ADMM.

    Iterates from ``B = Psi = L = 0`` (or from ``warm_start``):

    * B-step: :func:`b_step` on ``Lam - L + rho Psi``;
    * Psi-step: ``soft_threshold(B + L / rho, lam / rho)``;
    * L-step: ``L + rho (B - Psi)``.

    Stops when ``max(||B - Psi||_F, rho ||Psi - Psi_prev||_F)`` falls below
    ``tol * max(1, ||Psi||_F)`` and the KKT residual of Psi is within
    ``1e-3 * max(lam, ||Lam||_inf)``.  ``stop_below`` replaces the relative
    rule with an absolute threshold on both residuals (used for convergence
    studies).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    opts = opts or SolverOptions()
    LambdaHat = np.asarray(LambdaHat, dtype=float)
    p = stats.p
    if LambdaHat.shape != (p, p):
        raise ValueError(f"LambdaHat has shape {LambdaHat.shape}, expected {(p, p)}")
    rho = float(opts.rho)
    D = _d_weights(stats.d, rho)
    kkt_tol = kkt_tolerance(LambdaHat, lam)

    if warm_start is not None and warm_start.B is not None:
        Psi = warm_start.omega.copy()
        L = warm_start.L.copy()
    else:
        Psi = np.zeros((p, p))
        L = np.zeros((p, p))
    B = Psi.copy()

    primal, dual = [], []
    converged = False
    kkt = np.inf
    t0 = time.perf_counter()
    k = 0
    for k in range(1, int(opts.max_iter) + 1):
        B = b_step(LambdaHat - L + rho * Psi, stats, rho, D)
        Psi_prev = Psi
        Psi = soft_threshold(B + L / rho, lam / rho)
        R = B - Psi
        L = L + rho * R
        if check_symmetry:
            for name, A in (("B", B), ("Psi", Psi), ("L", L)):
                if not np.array_equal(A, A.T):
                    raise AssertionError(f"{name} lost symmetry at iteration {k}")
        r = float(np.linalg.norm(R))
        s = rho * float(np.linalg.norm(Psi - Psi_prev))
        primal.append(r)
        dual.append(s)
        if stop_below is not None:
            if max(r, s) <= stop_below:
                converged = True
                break
            continue
        if max(r, s) <= opts.tol * max(1.0, float(np.linalg.norm(Psi))):
            kkt = kkt_residual(Psi, stats, LambdaHat, lam)
            if kkt <= kkt_tol:
                converged = True
                break
    seconds = time.perf_counter() - t0
    if not np.isfinite(kkt) or stop_below is not None:
        kkt = kkt_residual(Psi, stats, LambdaHat, lam)
    return InteractionFit(
        omega=Psi,
        lambda_=float(lam),
        iterations=k,
        primal_residuals=primal,
        dual_residuals=dual,
        converged=converged and kkt <= kkt_tol,
        kkt_residual=kkt,
        seconds=seconds,
        B=B,
        L=L,
    )
