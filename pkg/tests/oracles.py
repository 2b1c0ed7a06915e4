"""Reference computations written independently of the package.

Everything here uses plain loops, dense Kronecker systems or brute-force
search so that agreement with the library is meaningful.
"""

import numpy as np


def loop_sigma(X):
    n, p = X.shape
    xbar = [sum(X[i, k] for i in range(n)) / n for k in range(p)]
    S = np.zeros((p, p))
    for k in range(p):
        for l in range(p):
            S[k, l] = sum((X[i, k] - xbar[k]) * (X[i, l] - xbar[l]) for i in range(n)) / n
    return S


def loop_weighted_moment(X, w):
    """n^-1 sum_i w_i (x_i - xbar)(x_i - xbar)^T by triple loop."""
    n, p = X.shape
    xbar = [sum(X[i, k] for i in range(n)) / n for k in range(p)]
    M = np.zeros((p, p))
    for k in range(p):
        for l in range(p):
            M[k, l] = sum(w[i] * (X[i, k] - xbar[k]) * (X[i, l] - xbar[l]) for i in range(n)) / n
    return M


def loop_lambda_y(X, y):
    ybar = sum(y) / len(y)
    return loop_weighted_moment(X, [v - ybar for v in y])


def loop_residuals(X, y, beta):
    n, p = X.shape
    xbar = [sum(X[i, k] for i in range(n)) / n for k in range(p)]
    ybar = sum(y) / n
    return np.array([
        (y[i] - ybar) - sum((X[i, k] - xbar[k]) * beta[k] for k in range(p)) for i in range(n)
    ])


def kron_b_step(Sigma, LambdaK, rho):
    """Dense solve of (2 S kron S + rho I) vec(B) = vec(LambdaK)."""
    p = Sigma.shape[0]
    A = 2.0 * np.kron(Sigma, Sigma) + rho * np.eye(p * p)
    return np.linalg.solve(A, LambdaK.reshape(-1)).reshape(p, p)


def normal_equations(Z, y):
    return np.linalg.solve(Z.T @ Z, Z.T @ y)


def grid_refine_min(f, center, radius, points=41, rounds=40, shrink=4.0):
    """Minimize a convex function of a few variables by zooming grids.

    Each round evaluates ``f`` on a full tensor grid around the incumbent
    and shrinks the box around the best point.
    """
    center = np.asarray(center, dtype=float)
    radius = np.full(center.shape, float(radius))
    best = center
    for _ in range(rounds):
        axes = [np.linspace(c - r, c + r, points) for c, r in zip(best, radius)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(best))
        vals = np.array([f(v) for v in mesh])
        best = mesh[int(np.argmin(vals))]
        radius = radius / shrink
    return best


def lasso_objective(Xc, yc, b, lam):
    r = yc - Xc @ b
    return float(r @ r / (2 * len(yc)) + lam * np.abs(b).sum())


def grid_lasso(X, y, lam):
    """p = 2 LASSO on centered data by zooming grid search."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    ols = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    radius = 2.0 * max(1.0, float(np.abs(ols).max()))
    return grid_refine_min(lambda b: lasso_objective(Xc, yc, b, lam), np.zeros(2), radius)


def loo_lasso_errors(X, y, lambdas, solver):
    """Leave-one-out squared errors per penalty.

    ``solver(Xs, yc, lam)`` must return coefficients for centered, scaled
    training data; scaling uses the divisor-n standard deviation of each
    training fold.
    """
    n = X.shape[0]
    err = np.zeros(len(lambdas))
    for i in range(n):
        keep = np.arange(n) != i
        Xt, yt = X[keep], y[keep]
        mu, ym = Xt.mean(axis=0), yt.mean()
        sd = np.sqrt(((Xt - mu) ** 2).mean(axis=0))
        for j, lam in enumerate(lambdas):
            w = solver((Xt - mu) / sd, yt - ym, lam)
            pred = ym + (X[i] - mu) @ (w / sd)
            err[j] += (y[i] - pred) ** 2
    return err / n


def cd_lasso(Xs, yc, lam, sweeps=20000, tol=1e-15):
    """Textbook cyclic coordinate descent, pure numpy."""
    n, p = Xs.shape
    w = np.zeros(p)
    r = yc.copy()
    for _ in range(sweeps):
        biggest = 0.0
        for j in range(p):
            cj = Xs[:, j] @ Xs[:, j] / n
            z = Xs[:, j] @ r / n + cj * w[j]
            new = np.sign(z) * max(abs(z) - lam, 0.0) / cj
            d = new - w[j]
            if d != 0.0:
                r -= d * Xs[:, j]
                w[j] = new
                biggest = max(biggest, abs(d))
        if biggest < tol:
            break
    return w


def pie_objective_vec(B, Sigma, Lambda, lam):
    b = B.reshape(-1)
    H = 2.0 * np.kron(Sigma, Sigma)
    return float(0.5 * b @ H @ b - Lambda.reshape(-1) @ b + lam * np.abs(b).sum())


def grid_refine_min_batch(f, center, radius, points=9, rounds=80, shrink=2.0):
    """Like :func:`grid_refine_min` but ``f`` maps an (m, dim) array of
    candidates to m values, so higher dimensions stay affordable."""
    best = np.asarray(center, dtype=float)
    radius = float(radius)
    for _ in range(rounds):
        axes = [np.linspace(c - radius, c + radius, points) for c in best]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, best.size)
        best = mesh[int(np.argmin(f(mesh)))]
        radius /= shrink
    return best


def all_pairs_grid_oracle(X, y, lam):
    """All-pairs LASSO for p = 2 by grid search over the five coefficients.

    Columns: x1, x2, x1^2, x2 x1, x2^2 (centered products of centered
    covariates), each scaled to unit divisor-n variance.  Returns
    ``(beta, B)`` on the original scale with the off-diagonal split in half.
    """
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    prods = np.column_stack([Xc[:, 0] ** 2, Xc[:, 1] * Xc[:, 0], Xc[:, 1] ** 2])
    Z = np.column_stack([Xc, prods - prods.mean(axis=0)])
    sd = np.sqrt((Z**2).mean(axis=0))
    Zs = Z / sd
    yc = y - y.mean()

    def f(W):
        R = yc[None, :] - W @ Zs.T
        return (R**2).sum(axis=1) / (2 * n) + lam * np.abs(W).sum(axis=1)

    ols = np.linalg.lstsq(Zs, yc, rcond=None)[0]
    w = grid_refine_min_batch(f, np.zeros(5), 2.0 * np.abs(ols).max() + 1.0) / sd
    B = np.array([[w[2], w[3] / 2], [w[3] / 2, w[4]]])
    return w[:2], B
