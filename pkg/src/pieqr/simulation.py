"""Data-generating processes and the Monte-Carlo replication harness.

Models are named ``"m1"`` ... ``"m4"`` or ``"robustness:<d>"``.  Each is a
list of formula terms; the true ``beta`` and ``Omega`` are derived from the
terms (``c X_k X_l`` with ``k != l`` contributes ``c / 2`` to both
``Omega_kl`` and ``Omega_lk``), while responses are evaluated from the terms
directly.  Indices in formulas are 1-based to match ``X_1 ... X_p``.

Every random draw is a pure function of the integer seed: covariates,
model indices and noise use independent streams ``default_rng([seed, s])``.
"""

from __future__ import annotations

import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import MetricReport, fit_all_pairs, metrics, oracle_fit
from .moments import Dataset
from .tuning import PIEOptions, fit_pier, fit_piey

log = logging.getLogger(__name__)

LAWS = ("gaussian_ar", "factor_uniform", "factor_t5", "factor_laplace", "gaussian_identity")
LAW_KURTOSIS = {
    "gaussian_ar": 3.0,
    "gaussian_identity": 3.0,
    "factor_uniform": 1.8,
    "factor_t5": 9.0,
    "factor_laplace": 6.0,
}
MODELS = ("m1", "m2", "m3", "m4")
METHODS = ("piey", "pier", "all_pairs_lasso", "oracle")

_COVARIATE_STREAM, _MODEL_STREAM, _NOISE_STREAM, _SUBSAMPLE_STREAM = 0, 1, 2, 3

# interactions shared by every simulation model: 2 X1 X6 + X6^2 + 2 X6 X10
_INTERACTIONS = (((1, 6), 2.0), ((6, 6), 1.0), ((6, 10), 2.0))
_MAIN = {
    "m1": ((1, 1.0), (6, 1.0), (10, 1.0)),
    "m2": ((6, 1.0),),
    "m3": ((1, 1.0), (2, 1.0)),
    "m4": (),
}


@dataclass(frozen=True)
class CovariateLaw:
    kind: str = "gaussian_ar"
    ar_coefficient: float = 0.5

    def __post_init__(self):
        if self.kind not in LAWS:
            raise ValueError(f"unknown law {self.kind!r}; valid: {', '.join(LAWS)}")

    @property
    def kurtosis(self) -> float:
        return LAW_KURTOSIS[self.kind]


def power_decay_covariance(p: int, coef: float) -> np.ndarray:
    idx = np.arange(p)
    return coef ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def innovations(kind: str, size, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. symmetric draws with mean 0 and variance 1."""
    if kind in ("gaussian_ar", "gaussian_identity"):
        return rng.standard_normal(size)
    if kind == "factor_uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
    if kind == "factor_t5":
        return rng.standard_t(5, size) * np.sqrt(3.0 / 5.0)
    if kind == "factor_laplace":
        return rng.laplace(0.0, 1.0, size) / np.sqrt(2.0)
    raise ValueError(f"unknown law {kind!r}")


def gen_covariates(law: CovariateLaw, n: int, p: int, seed: int) -> np.ndarray:
    """Rows ``x = C z`` with ``C`` the lower Cholesky factor of the power-decay
    covariance (identity for ``gaussian_identity``)."""
    rng = np.random.default_rng([seed, _COVARIATE_STREAM])
    Z = innovations(law.kind, (n, p), rng)
    if law.kind == "gaussian_identity" or law.ar_coefficient == 0:
        return Z
    C = np.linalg.cholesky(power_decay_covariance(p, law.ar_coefficient))
    return Z @ C.T


@dataclass(frozen=True)
class TrueModel:
    """Formula terms and the implied parameters (zero-based arrays)."""

    name: str
    main_terms: tuple
    interaction_terms: tuple
    beta: np.ndarray
    omega: np.ndarray

    @property
    def support(self) -> list[tuple[int, int]]:
        k, l = np.nonzero(np.tril(self.omega))
        return list(zip(k.tolist(), l.tolist()))

    @property
    def main_support(self) -> list[int]:
        return np.flatnonzero(self.beta).tolist()

    def mean_response(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        for k, c in self.main_terms:
            out += c * X[:, k - 1]
        for (k, l), c in self.interaction_terms:
            out += c * X[:, k - 1] * X[:, l - 1]
        return out


def parse_model(model: str) -> tuple[str, int | None]:
    if model in MODELS:
        return model, None
    if model.startswith("robustness:"):
        d = int(model.split(":", 1)[1])
        if d < 3:
            raise ValueError("robustness models need d >= 3")
        return "robustness", d
    raise ValueError(f"unknown model {model!r}; valid: {', '.join(MODELS)}, robustness:<d>")


def true_model(model: str, p: int, seed: int = 0) -> TrueModel:
    """Terms and parameters of ``model``; ``seed`` only matters for the random
    main-effect indices of ``robustness:<d>``."""
    name, d = parse_model(model)
    if p < 10:
        raise ValueError(f"model {model} references X10; need p >= 10, got {p}")
    if name == "robustness":
        if d - 3 > p - 10:
            raise ValueError(f"cannot draw {d - 3} extra main effects from X11..X{p}")
        rng = np.random.default_rng([seed, _MODEL_STREAM])
        extra = rng.choice(np.arange(11, p + 1), size=d - 3, replace=False)
        w = d ** -0.5
        main = tuple((int(k), w) for k in (1, 6, 10, *sorted(extra.tolist())))
    else:
        main = _MAIN[name]
    beta = np.zeros(p)
    for k, c in main:
        beta[k - 1] += c
    omega = np.zeros((p, p))
    for (k, l), c in _INTERACTIONS:
        if k == l:
            omega[k - 1, k - 1] += c
        else:
            omega[k - 1, l - 1] += c / 2
            omega[l - 1, k - 1] += c / 2
    return TrueModel(model, main, _INTERACTIONS, beta, omega)


def gen_response(model: str | TrueModel, X, seed: int, noise_sd: float = 1.0) -> np.ndarray:
    """Model formula evaluated at ``X`` plus ``N(0, noise_sd^2)`` errors."""
    X = np.asarray(X, dtype=float)
    tm = model if isinstance(model, TrueModel) else true_model(model, X.shape[1], seed)
    rng = np.random.default_rng([seed, _NOISE_STREAM])
    eps = rng.standard_normal(X.shape[0])
    return tm.mean_response(X) + noise_sd * eps


@dataclass(frozen=True)
class SimulationSpec:
    model: str
    n: int
    p: int
    law: CovariateLaw = field(default_factory=CovariateLaw)
    replications: int = 100
    base_seed: int = 0
    noise_sd: float = 1.0

    def __post_init__(self):
        parse_model(self.model)
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


def default_law(model: str) -> CovariateLaw:
    """Power-decay Gaussian, except independent Gaussian for robustness sweeps."""
    name, _ = parse_model(model)
    return CovariateLaw("gaussian_identity" if name == "robustness" else "gaussian_ar")


def simulate(spec: SimulationSpec, replication: int) -> tuple[Dataset, TrueModel]:
    seed = spec.base_seed + replication
    X = gen_covariates(spec.law, spec.n, spec.p, seed)
    tm = true_model(spec.model, spec.p, seed)
    y = gen_response(tm, X, seed, spec.noise_sd)
    return Dataset(X, y), tm


def run_method(method: str, dataset: Dataset, tm: TrueModel, seed: int,
               opts: PIEOptions | None = None) -> MetricReport:
    t0 = time.perf_counter()
    if method == "piey":
        model, _ = fit_piey(dataset, opts)
    elif method == "pier":
        o = opts or PIEOptions()
        model, _ = fit_pier(dataset, replace(o, seed=seed))
    elif method == "all_pairs_lasso":
        model, _ = fit_all_pairs(dataset, seed=seed)
    elif method == "oracle":
        report, _ = oracle_fit(dataset, tm.support, tm.main_support, tm.omega)
        report.time_seconds = time.perf_counter() - t0
        return report
    else:
        raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    return metrics(model.omega, tm.omega, time.perf_counter() - t0)


def _one_replication(args):
    spec, r, methods, opts = args
    dataset, tm = simulate(spec, r)
    out = {}
    for m in methods:
        try:
            out[m] = run_method(m, dataset, tm, spec.base_seed + r, opts)
        except Exception as exc:  # recorded per replication, never fatal
            log.warning("replication %d, method %s failed: %s", r, m, exc)
            out[m] = f"{type(exc).__name__}: {exc}"
            log.debug(traceback.format_exc())
    return out


@dataclass
class ReplicationSummary:
    """Per-method records over all replications.

    ``records[method][r]`` is a :class:`MetricReport`, or ``None`` when the
    method failed on replication ``r`` (reason in ``failures``).
    """

    spec: SimulationSpec
    methods: tuple
    records: dict
    failures: dict

    def completed(self, method: str) -> int:
        return sum(r is not None for r in self.records[method])

    def values(self, method: str, stat: str) -> np.ndarray:
        return np.array([getattr(r, stat) for r in self.records[method] if r is not None],
                        dtype=float)

    def mean(self, method: str, stat: str) -> float:
        v = self.values(method, stat)
        return float(v.mean()) if v.size else float("nan")

    def sd(self, method: str, stat: str) -> float:
        v = self.values(method, stat)
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    def table(self, include_time: bool = True) -> list[dict]:
        """Rows of ``method, statistic, mean, sd, completed``."""
        stats = ("rate", "loss", "size") + (("time_seconds",) if include_time else ())
        return [
            {"method": m, "statistic": s, "mean": self.mean(m, s), "sd": self.sd(m, s),
             "completed": self.completed(m)}
            for m in self.methods for s in stats
        ]


def max_workers() -> int:
    cap = os.environ.get("PIE_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def run_replications(spec: SimulationSpec, methods=("piey",), opts: PIEOptions | None = None,
                     workers: int | None = None) -> ReplicationSummary:
    """Run every method on ``spec.replications`` seeded data sets.

    Replication ``r`` uses seed ``spec.base_seed + r``, so results do not
    depend on the number of workers.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; valid: {', '.join(METHODS)}")
    workers = workers or max_workers()
    jobs = [(spec, r, methods, opts) for r in range(spec.replications)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_replication, jobs))
    else:
        results = [_one_replication(j) for j in jobs]
    records = {m: [] for m in methods}
    failures = {m: [] for m in methods}
    for r, res in enumerate(results):
        for m in methods:
            if isinstance(res[m], MetricReport):
                records[m].append(res[m])
            else:
                records[m].append(None)
                failures[m].append((r, res[m]))
    return ReplicationSummary(spec, methods, records, failures)


# -- noise augmentation experiments -----------------------------------------

N_GAUSSIAN_NOISE = 50
N_UNIFORM_NOISE = 50


def standardize(dataset: Dataset) -> Dataset:
    """Every covariate and the response to mean 0, variance 1 (divisor n)."""
    def z(a):
        sd = a.std(axis=0)
        sd = np.where(sd == 0, 1.0, sd)
        return (a - a.mean(axis=0)) / sd

    return Dataset(z(dataset.X), z(dataset.y))


def is_standardized(dataset: Dataset, tol: float = 1e-6) -> bool:
    X = dataset.X
    return bool(np.all(np.abs(X.mean(axis=0)) <= tol) and np.all(np.abs(X.var(axis=0) - 1) <= tol))


def noise_augment(dataset: Dataset, seed: int, experiment: int, noise_scale: float = 1.0):
    """Append 50 standard normal and 50 uniform ``[-sqrt 3, sqrt 3]`` columns.

    For experiment 2 the response also gains ``0.5 X_a X_{a+1} + 0.5 X_b X_{b+1}``
    where ``a`` is the first Gaussian noise column and ``b`` the last one (so
    ``b + 1`` is the first uniform column); with 11 original covariates these
    are ``X12 X13`` and ``X61 X62``.

    Returns ``(Dataset, planted)`` with ``planted`` the zero-based ``(k, l)``
    pairs (``l <= k``) of the added interactions.
    """
    if experiment not in (1, 2):
        raise ValueError(f"experiment must be 1 or 2, got {experiment}")
    if not is_standardized(dataset):
        raise ValueError("covariates must be standardized (mean 0, variance 1) first")
    rng = np.random.default_rng([seed, _COVARIATE_STREAM])
    n, p0 = dataset.X.shape
    gauss = rng.standard_normal((n, N_GAUSSIAN_NOISE))
    unif = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), (n, N_UNIFORM_NOISE))
    X = np.hstack([dataset.X, noise_scale * gauss, noise_scale * unif])
    y = np.array(dataset.y)
    planted = []
    if experiment == 2:
        a, b = p0, p0 + N_GAUSSIAN_NOISE - 1
        y = y + 0.5 * X[:, a] * X[:, a + 1] + 0.5 * X[:, b] * X[:, b + 1]
        planted = [(a + 1, a), (b + 1, b)]
    return Dataset(X, y), planted


def frequency_matrix(fits, p: int) -> np.ndarray:
    """Count, per entry, how many fits have a nonzero interaction there.

    ``fits`` may hold :class:`~pieqr.admm.InteractionFit`, models with an
    ``omega`` attribute, or plain matrices.
    """
    F = np.zeros((p, p), dtype=int)
    for f in fits:
        omega = np.asarray(getattr(f, "omega", f))
        if omega.shape != (p, p):
            raise ValueError(f"fit has shape {omega.shape}, expected {(p, p)}")
        nz = omega != 0
        F += (nz | nz.T).astype(int)
    return F


def top_pairs(F: np.ndarray, k: int = 10, off_diagonal: bool = False) -> list[tuple[int, int, int]]:
    """The ``k`` most frequent ``(row, col, count)`` entries with ``col <= row``.

    Ties are broken by position so the order is deterministic.
    """
    rows, cols = np.tril_indices(F.shape[0], -1 if off_diagonal else 0)
    counts = F[rows, cols]
    order = np.lexsort((cols, rows, -counts))[:k]
    return [(int(rows[i]), int(cols[i]), int(counts[i])) for i in order]


@dataclass
class ExperimentResult:
    frequency: np.ndarray
    planted: list
    fits: list
    subsample_rows: list


def run_noise_experiment(dataset: Dataset, experiment: int, method: str = "piey",
                         subsamples: int = 100, subsample_size: int = 400, seed: int = 0,
                         opts: PIEOptions | None = None) -> ExperimentResult:
    """Standardize, augment with noise columns and refit on random subsamples.

    Subsamples are drawn without replacement.  The frequency matrix counts
    how often each interaction is selected.
    """
    base = standardize(dataset)
    aug, planted = noise_augment(base, seed, experiment)
    n = aug.n
    if subsample_size > n:
        raise ValueError(f"subsample size {subsample_size} exceeds n = {n}")
    rng = np.random.default_rng([seed, _SUBSAMPLE_STREAM])
    fits, rows_used = [], []
    for r in range(subsamples):
        rows = np.sort(rng.choice(n, size=subsample_size, replace=False))
        sub = Dataset(aug.X[rows], aug.y[rows])
        if method == "piey":
            model, _ = fit_piey(sub, opts)
        elif method == "pier":
            o = opts or PIEOptions()
            model, _ = fit_pier(sub, replace(o, seed=seed + r))
        else:
            raise ValueError(f"experiments support piey and pier, got {method!r}")
        fits.append(model)
        rows_used.append(rows)
    return ExperimentResult(frequency_matrix(fits, aug.p), planted, fits, rows_used)
