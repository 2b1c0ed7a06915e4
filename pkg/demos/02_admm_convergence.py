"""
Watching the solver converge
============================

The penalized problem is solved by ADMM with a closed-form matrix step built
from one SVD of the centered design.  Here we follow the residual trace and
compare the result with a slow vectorized solver on a small problem.
"""

import numpy as np

from pieqr import Dataset, SolverOptions, center, lambda_y, solve_pie
from pieqr.admm import kkt_residual, kkt_tolerance, pie_objective
from pieqr.evaluation import brute_force_pie

rng = np.random.default_rng(0)
X = rng.standard_normal((100, 50))
y = X[:, 0] * X[:, 1] + rng.standard_normal(100)

stats = center(Dataset(X, y))
Lam = lambda_y(stats, y)
lam = 0.3 * np.abs(Lam).max()

# run to a tight absolute threshold so the whole linear phase is visible
fit = solve_pie(stats, Lam, lam, SolverOptions(max_iter=5000), stop_below=1e-10)
r = np.asarray(fit.primal_residuals)
print(f"{fit.iterations} iterations, final primal residual {r[-1]:.1e}")
for k in (1, 10, 50, 100, fit.iterations):
    print(f"  iter {k:4d}: ||B - Psi|| = {r[k - 1]:.2e}")

# a straight line in log scale means a constant contraction factor
tail = np.arange(fit.iterations) >= fit.iterations // 5
slope = np.polyfit(np.flatnonzero(tail), np.log(r[tail]), 1)[0]
print(f"per-iteration contraction about {np.exp(slope):.3f}")

print(f"KKT residual {kkt_residual(fit.omega, stats, Lam, lam):.1e} "
      f"(tolerance {kkt_tolerance(Lam, lam):.1e})")

# small problem: check against accelerated proximal gradient on vec(B)
Xs = X[:, :4]
ys = Xs[:, 0] * Xs[:, 3] + rng.standard_normal(100)
s4 = center(Dataset(Xs, ys))
L4 = lambda_y(s4, ys)
lam4 = 0.2 * np.abs(L4).max()
a = solve_pie(s4, L4, lam4, SolverOptions(max_iter=100_000), stop_below=1e-12).omega
b = brute_force_pie(s4.sigma(), L4, lam4)
print("objectives:", pie_objective(a, s4, L4, lam4), pie_objective(b, s4, L4, lam4))
print("same support:", np.array_equal(a != 0, b != 0))
