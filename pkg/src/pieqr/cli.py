"""Command-line entry point.

Three subcommands::

    pieqr fit --input data.csv --response y --method piey --out report.json
    pieqr simulate --model m4 --n 200 --p 100 --reps 50 --methods piey oracle
    pieqr experiment --input data.csv --response y --experiment 2 --out freq.csv

Exit status is 0 on success, 2 for unusable input (unreadable file, missing
column, non-numeric cell, unknown model or experiment), 3 when the selected
fit did not converge (the report is still written and flagged) and 1 for
other failures.  Indices in every report are 1-based.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .admm import SolverOptions
from .evaluation import all_pairs_lasso, fit_all_pairs, penalized_model
from .moments import Dataset
from .simulation import (
    LAWS,
    N_GAUSSIAN_NOISE,
    N_UNIFORM_NOISE,
    CovariateLaw,
    SimulationSpec,
    default_law,
    parse_model,
    run_noise_experiment,
    run_replications,
    top_pairs,
)
from .tuning import NoAdmissibleFitError, PIEOptions, fit_pier, fit_piey

log = logging.getLogger("pieqr")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAILURE, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2, 3
# command-line spelling -> library name
METHOD_NAMES = {"piey": "piey", "pier": "pier", "all-pairs": "all_pairs_lasso",
                "all_pairs_lasso": "all_pairs_lasso", "oracle": "oracle"}


class InputError(Exception):
    """Input the command cannot use; reported with exit status 2."""


# -- input --------------------------------------------------------------------

def read_csv(path, response: str) -> tuple[Dataset, list[str]]:
    """Load a headed, comma-separated numeric table.

    Every column other than ``response`` becomes a covariate, in file order.
    Returns the dataset and the covariate names.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InputError(f"{path}: file is empty")
            header = [h.strip() for h in header]
            if response not in header:
                raise InputError(f"{path}: no column named {response!r}; columns are "
                                 + ", ".join(header))
            rows = []
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise InputError(f"{path}, line {reader.line_num}: expected "
                                     f"{len(header)} cells, found {len(row)}")
                vals = []
                for name, cell in zip(header, row):
                    try:
                        vals.append(float(cell))
                    except ValueError:
                        raise InputError(f"{path}, line {reader.line_num}, column {name!r}: "
                                         f"non-numeric cell {cell!r}") from None
                rows.append(vals)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.array(rows)
    j = header.index(response)
    names = [h for i, h in enumerate(header) if i != j]
    try:
        dataset = Dataset(np.delete(data, j, axis=1), data[:, j])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return dataset, names


# -- output -------------------------------------------------------------------

def _num(x):
    """JSON-safe float: non-finite values become null."""
    x = float(x)
    return x if math.isfinite(x) else None


def support_triples(omega) -> list[list]:
    """``[k, l, value]`` with 1-based ``l <= k`` for every nonzero entry."""
    k, l = np.nonzero(np.tril(omega))
    return [[int(a) + 1, int(b) + 1, float(omega[a, b])] for a, b in zip(k, l)]


def _write(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- fit ----------------------------------------------------------------------

def _pie_options(args) -> PIEOptions:
    return PIEOptions(
        solver=SolverOptions(rho=args.rho, tol=args.tol, max_iter=args.max_iter),
        lambda_=args.lambda_,
        grid_points=args.grid_points,
        grid_ratio=args.grid_ratio,
        folds=args.folds,
        seed=args.seed,
        refit_main=args.refit_main,
    )


def _pie_path_table(path) -> list[dict]:
    bic = path.bic if path.bic is not None else np.full(len(path.lambdas), np.nan)
    return [
        {"lambda": _num(lam), "size": len(sup), "df": int(df), "rss": _num(rss),
         "bic": _num(b), "admissible": bool(ok), "iterations": f.iterations,
         "converged": bool(f.converged), "kkt_residual": _num(f.kkt_residual)}
        for lam, sup, df, rss, b, ok, f in zip(path.lambdas, path.supports, path.df,
                                               path.refit_rss, bic, path.admissible,
                                               path.fits)
    ]


def _fit_pie(dataset, args):
    opts = _pie_options(args)
    fit = fit_piey if args.method == "piey" else fit_pier
    model, path = fit(dataset, opts)
    chosen = path.chosen_fit
    extra = {
        "chosen_index": path.chosen_index + 1,
        "path": _pie_path_table(path),
        "iterations": chosen.iterations,
        "kkt_residual": _num(chosen.kkt_residual),
        "primal_residuals": [_num(r) for r in chosen.primal_residuals],
        "dual_residuals": [_num(r) for r in chosen.dual_residuals],
    }
    return model, path, bool(chosen.converged), extra


def _fit_all_pairs(dataset, args):
    if args.lambda_ is not None:
        beta, B = all_pairs_lasso(dataset, args.lambda_)
        model = penalized_model(dataset, beta, B)
        return model, None, True, {"tuning": "fixed"}
    model, path = fit_all_pairs(dataset, grid_points=args.grid_points,
                                grid_ratio=args.grid_ratio, folds=args.folds, seed=args.seed)
    table = [{"lambda": _num(lam), "df": int(df), "cv_error": _num(e)}
             for lam, df, e in zip(path.lambdas, path.df, path.cv_error)]
    return model, path, True, {"tuning": "cv-1se", "chosen_index": path.chosen_index + 1,
                               "path": table}


def cmd_fit(args) -> int:
    if args.lambda_ is not None and (args.grid_points is not None or args.grid_ratio is not None):
        raise InputError("--lambda cannot be combined with --grid-points or --grid-ratio")
    args.grid_points = 50 if args.grid_points is None else args.grid_points
    args.grid_ratio = 0.01 if args.grid_ratio is None else args.grid_ratio
    dataset, names = read_csv(args.input, args.response)
    log.info("read %d rows and %d covariates from %s", dataset.n, dataset.p, args.input)

    if args.method == "all-pairs":
        model, path, converged, extra = _fit_all_pairs(dataset, args)
    else:
        model, path, converged, extra = _fit_pie(dataset, args)
    lam = args.lambda_ if path is None else path.lambdas[path.chosen_index]
    support = support_triples(model.omega)
    main = [[int(k) + 1, float(model.beta[k])] for k in np.flatnonzero(model.beta)]

    if args.format == "csv":
        rows = [["intercept", "", "", repr(float(model.alpha))]]
        rows += [["main", k, "", repr(v)] for k, v in main]
        rows += [["interaction", k, l, repr(v)] for k, l, v in support]
        _write(_csv_text(["term", "k", "l", "value"], rows), args.out)
    else:
        report = {
            "schema_version": SCHEMA_VERSION,
            "method": args.method,
            "status": "converged" if converged else "not_converged",
            "partial": not converged,
            "n": dataset.n,
            "p": dataset.p,
            "response": args.response,
            "covariates": names,
            "lambda": _num(lam),
            "alpha": _num(model.alpha),
            "mu": [float(v) for v in model.mu],
            "beta": main,
            "main_support": [k for k, _ in main],
            "support": support,
        }
        report.update(extra)
        _write(_dump_json(report), args.out)
    if not converged:
        log.error("the selected fit did not converge; the report is flagged as partial")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        parse_model(args.model)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    methods = []
    for m in args.methods:
        if m not in METHOD_NAMES:
            raise InputError(f"unknown method {m!r}; valid: {', '.join(METHOD_NAMES)}")
        methods.append(METHOD_NAMES[m])
    law = CovariateLaw(args.law) if args.law else default_law(args.model)
    try:
        spec = SimulationSpec(args.model, args.n, args.p, law=law, replications=args.reps,
                              base_seed=args.seed, noise_sd=args.noise_sd)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    args.lambda_ = None
    opts = _pie_options(args)
    summary = run_replications(spec, methods, opts)
    rows = summary.table(include_time=not args.no_time)
    for m in methods:
        for r, msg in summary.failures[m]:
            log.warning("%s failed on replication %d: %s", m, r, msg)

    if args.format == "csv":
        text = _csv_text(["method", "statistic", "mean", "sd", "completed"],
                         [[r["method"], r["statistic"], repr(r["mean"]), repr(r["sd"]),
                           r["completed"]] for r in rows])
    else:
        text = _dump_json({
            "schema_version": SCHEMA_VERSION,
            "model": args.model,
            "n": args.n,
            "p": args.p,
            "law": law.kind,
            "replications": args.reps,
            "base_seed": args.seed,
            "noise_sd": args.noise_sd,
            "rows": [{**r, "mean": _num(r["mean"]), "sd": _num(r["sd"])} for r in rows],
            "failures": {m: [[r + 1, msg] for r, msg in summary.failures[m]] for m in methods},
        })
    _write(text, args.out)
    return EXIT_OK


# -- experiment ---------------------------------------------------------------

def cmd_experiment(args) -> int:
    if args.experiment not in (1, 2):
        raise InputError(f"--experiment must be 1 or 2, got {args.experiment}")
    dataset, names = read_csv(args.input, args.response)
    names = (names + [f"gauss_noise_{i + 1}" for i in range(N_GAUSSIAN_NOISE)]
             + [f"uniform_noise_{i + 1}" for i in range(N_UNIFORM_NOISE)])
    args.lambda_ = None
    opts = _pie_options(args)
    try:
        res = run_noise_experiment(dataset, args.experiment, method=args.method,
                                   subsamples=args.subsamples,
                                   subsample_size=args.subsample_size, seed=args.seed,
                                   opts=opts)
    except ValueError as exc:
        raise InputError(str(exc)) from None

    out = Path(args.out)
    buf = io.StringIO()
    np.savetxt(buf, res.frequency, fmt="%d", delimiter=",")
    out.write_text(buf.getvalue(), encoding="utf-8")
    top = [{"k": k + 1, "l": l + 1, "count": c, "names": [names[k], names[l]]}
           for k, l, c in top_pairs(res.frequency, 10)]
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "experiment": args.experiment,
        "method": args.method,
        "subsamples": args.subsamples,
        "subsample_size": args.subsample_size,
        "seed": args.seed,
        "frequency_csv": out.name,
        "covariates": names,
        "planted": [[k + 1, l + 1] for k, l in res.planted],
        "top_pairs": top,
    }
    out.with_suffix(".json").write_text(_dump_json(sidecar), encoding="utf-8")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--rho", type=float, default=1.0, help="ADMM step parameter (default 1.0)")
    g.add_argument("--tol", type=float, default=1e-4, help="relative ADMM tolerance (default 1e-4)")
    g.add_argument("--max-iter", type=int, default=1000, help="ADMM iteration cap (default 1000)")
    g.add_argument("--folds", type=int, default=10, help="cross-validation folds (default 10)")
    g.add_argument("--refit-main", action=argparse.BooleanOptionalAction, default=None,
                   help="include main-effect columns in the refit (method default if unset)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pieqr",
                                     description="Sparse interaction estimation for quadratic regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one data set")
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--method", choices=("piey", "pier", "all-pairs"), default="piey")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="fixed penalty instead of a tuned grid")
    p.add_argument("--grid-points", type=int, default=None, help="penalty grid size (default 50)")
    p.add_argument("--grid-ratio", type=float, default=None,
                   help="smallest over largest grid penalty (default 0.01)")
    _solver_flags(p)
    p.add_argument("--out", help="report path (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte-Carlo replications of a simulation model")
    p.add_argument("--model", required=True, help="m1, m2, m3, m4 or robustness:<d>")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--law", choices=LAWS, default=None,
                   help="covariate law (default: gaussian_ar, gaussian_identity for robustness)")
    p.add_argument("--methods", nargs="+", default=["piey"],
                   help="any of piey, pier, all-pairs, oracle (default piey)")
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--grid-points", type=int, default=50)
    p.add_argument("--grid-ratio", type=float, default=0.01)
    _solver_flags(p)
    p.add_argument("--no-time", action="store_true",
                   help="omit timing rows so repeated runs give identical files")
    p.add_argument("--out", help="summary path (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="noise-augmentation selection frequencies")
    p.add_argument("--input", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--experiment", type=int, required=True, help="1 or 2")
    p.add_argument("--method", choices=("piey", "pier"), default="piey")
    p.add_argument("--subsamples", type=int, default=100)
    p.add_argument("--subsample-size", type=int, default=400)
    p.add_argument("--grid-points", type=int, default=50)
    p.add_argument("--grid-ratio", type=float, default=0.01)
    _solver_flags(p)
    p.add_argument("--out", required=True,
                   help="frequency matrix CSV; the top pairs go to the same name with .json")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except NoAdmissibleFitError as exc:
        log.error("%s", exc)
        return EXIT_FAILURE
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
