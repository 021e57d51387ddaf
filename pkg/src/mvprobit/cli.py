"""Command-line front end.

Subcommands: ``fit``, ``bootstrap``, ``simulate``, ``coverage`` and ``bench``.
Options may come from a JSON config (``--config``); flags override it.

Exit codes: 0 success, 2 input error, 3 estimation failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import bootstrap_se
from .estimator import fit
from .exceptions import EstimationError, InputError, NumericError
from .experiments import run_coverage, run_timing, simulation_design
from .io import build_model, dump_json, load_mapping, write_csv
from .verification import SimSpec, full_loglik, simulate_y

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_NUMERIC = 0, 2, 3, 4


def _csv_list(text, cast=str):
    return [cast(v.strip()) for v in text.split(",") if v.strip()]


def _int_list(text):
    return _csv_list(text, int)


def _add_data_args(p):
    p.add_argument("--data", help="combined CSV holding responses and predictors")
    p.add_argument("--x", help="predictor CSV (split-file mode)")
    p.add_argument("--y", help="response CSV (split-file mode)")
    p.add_argument("--response", type=_csv_list, help="comma-separated response columns")
    p.add_argument("--predictors", type=_csv_list, help="comma-separated predictor columns")
    p.add_argument("--shared-coef", dest="shared_coef", metavar="MAPPING", help="shared-coefficient mapping JSON")
    p.add_argument("--no-intercept", dest="intercept", action="store_false", default=None)


def _add_common(p, out_required=False):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker cap (default: available cores)")
    p.add_argument("--out", required=out_required, help="output file (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"))


def build_parser():
    parser = argparse.ArgumentParser(prog="mvprobit", description="Two-stage composite likelihood multivariate probit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the model and report estimates with robust standard errors")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--full-loglik", dest="full_loglik", action="store_true", default=None,
                   help="also evaluate the full log-likelihood at the estimates (K <= 6)")

    p = sub.add_parser("bootstrap", help="bootstrap standard errors")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("simulate", help="simulate a data set (writes X.csv, Y.csv, spec.json)")
    _add_common(p, out_required=True)
    p.add_argument("--n", type=int, dest="n_obs")
    p.add_argument("--k", type=int, dest="n_components")
    p.add_argument("--p", type=int, dest="n_predictors")
    p.add_argument("--rho", type=float)

    p = sub.add_parser("coverage", help="Wald-interval coverage simulation")
    _add_common(p)
    p.add_argument("--n", type=int, dest="n_obs")
    p.add_argument("--k", type=int, dest="n_components")
    p.add_argument("--p", type=int, dest="n_predictors")
    p.add_argument("--reps", "--replicates", type=int, dest="reps")
    p.add_argument("--level", type=float)
    p.add_argument("--rho", type=float)

    p = sub.add_parser("bench", help="run-time grid")
    _add_common(p)
    p.add_argument("--n", type=_int_list, dest="n_obs", help="comma-separated N values")
    p.add_argument("--k", type=_int_list, dest="n_components")
    p.add_argument("--p", type=_int_list, dest="n_predictors")
    p.add_argument("--reps", "--replicates", type=int, dest="reps")
    p.add_argument("--include-variance", dest="include_variance", action="store_true", default=None)
    return parser


def _load_config(args):
    config = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
        if not isinstance(config, dict):
            raise InputError(f"{args.config}: top level must be an object")
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        config[key] = val
    if "threads" not in config:
        config["threads"] = os.cpu_count() or 1
    if int(config["threads"]) < 1:
        raise InputError("--threads must be >= 1")
    if "replicates" in config and "reps" not in config and args.command == "coverage":
        config["reps"] = config["replicates"]
    return config


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_table(config, header, rows, payload):
    if config.get("format", "json") == "csv":
        out = config.get("out")
        if out:
            write_csv(out, header, rows)
        else:
            w = csv.writer(sys.stdout)
            w.writerow(header)
            w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    else:
        _emit(dump_json(payload), config.get("out"))


def _timings_note(config, timings):
    # wall-clock numbers vary between runs; keep the main result reproducible
    out = config.get("out")
    if out and config.get("format", "json") == "json":
        Path(str(out) + ".timings.json").write_text(dump_json(timings), encoding="utf-8")
    print("timings (s): " + ", ".join(f"{k}={v:.4f}" for k, v in timings.items()), file=sys.stderr)


def cmd_fit(config):
    model = build_model(config)
    config["_component_names"] = model.component_names
    res = fit(model)
    payload = {
        "n_obs": model.n_obs,
        "components": list(model.component_names or []),
        "features": list(model.feature_names or []),
        "shared_coefficients": model.shared,
        "B": res.B_hat,
        "Sigma": res.Sigma_hat,
        "param_names": list(res.param_names),
        "estimates": res.params,
        "robust_se": res.stderr,
        "robust_cov": res.robust_cov,
        "loglik": {"stage1": res.stage1_loglik, "stage2": res.stage2_loglik},
        "min_eigenvalue": res.min_eigenvalue,
        "boundary_pairs": [list(p) for p in res.boundary_pairs],
        "converged": all(f.converged for f in res.stage1) and all(p.converged for p in res.stage2),
    }
    timings = dict(res.timings)
    if config.get("full_loglik"):
        t0 = time.perf_counter()
        ll, err = full_loglik(res.B_hat, res.Sigma_hat, model, seed=config.get("seed", 12345), return_error=True)
        timings["full_loglik"] = time.perf_counter() - t0
        payload["loglik"]["full"] = ll
        payload["loglik"]["full_se"] = err
    rows = [[n, float(e), float(s)] for n, e, s in zip(res.param_names, res.params, res.stderr)]
    _emit_table(config, ["parameter", "estimate", "robust_se"], rows, payload)
    _timings_note(config, timings)
    return EXIT_OK


def cmd_bootstrap(config):
    model = build_model(config)
    config["_component_names"] = model.component_names
    reps = config.get("replicates", 250)
    boot = bootstrap_se(model, replicates=reps, seed=config.get("seed", 0), n_jobs=int(config["threads"]))
    base = fit(model)
    payload = {
        "param_names": list(base.param_names),
        "estimates": base.params,
        "bootstrap_se": boot.se,
        "robust_se": base.stderr,
        "replicates": boot.requested,
        "succeeded": boot.n_ok,
        "failed": [{"replicate": r, "error": e} for r, e in boot.failures],
        "seed": config.get("seed", 0),
    }
    rows = [
        [n, float(e), float(b), float(s)] for n, e, b, s in zip(base.param_names, base.params, boot.se, base.stderr)
    ]
    _emit_table(config, ["parameter", "estimate", "bootstrap_se", "robust_se"], rows, payload)
    return EXIT_OK


def _sim_spec(config):
    seed = int(config.get("seed", 0))
    if "B" in config or "Sigma" in config:
        if "B" not in config or "Sigma" not in config:
            raise InputError("an explicit simulation spec needs both 'B' and 'Sigma'")
        B = np.asarray(config["B"], dtype=float)
        n = int(config.get("n_obs", 1000))
        rng = np.random.default_rng([seed, 0])
        X = np.column_stack([np.ones(n), rng.standard_normal((n, B.shape[0] - 1))])
        return SimSpec(B=B, Sigma=np.asarray(config["Sigma"], dtype=float), X=X, seed=seed)
    return simulation_design(
        int(config.get("n_obs", 1000)),
        int(config.get("n_components", 3)),
        int(config.get("n_predictors", 4)),
        rho=float(config.get("rho", 0.3)),
        seed=seed,
    )


def cmd_simulate(config):
    spec = _sim_spec(config)
    Y = simulate_y(spec, rng=np.random.default_rng([spec.seed, 1]))
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    P, K = spec.B.shape
    xnames = [f"x{p}" for p in range(1, P)]
    ynames = [f"y{k}" for k in range(1, K + 1)]
    write_csv(out / "X.csv", xnames, spec.X[:, 1:].tolist())
    write_csv(out / "Y.csv", ynames, Y.astype(int).tolist())
    dump_json(
        {
            "n_obs": spec.X.shape[0],
            "seed": spec.seed,
            "features": ["(Intercept)"] + xnames,
            "components": ynames,
            "B": spec.B,
            "Sigma": spec.Sigma,
        },
        out / "spec.json",
    )
    return EXIT_OK


def cmd_coverage(config):
    res = run_coverage(
        int(config.get("n_obs", 800)),
        int(config.get("n_components", 3)),
        int(config.get("n_predictors", 4)),
        reps=int(config.get("reps", 500)),
        level=float(config.get("level", 0.95)),
        seed=int(config.get("seed", 0)),
        rho=float(config.get("rho", 0.3)),
        n_jobs=int(config["threads"]),
    )
    rows = res.rows()
    payload = {"level": res.level, "reps_ok": res.n_ok, "reps_failed": res.n_failed, "rows": rows}
    header = list(rows[0])
    _emit_table(config, header, [[r[h] for h in header] for r in rows], payload)
    return EXIT_OK


def cmd_bench(config):
    cells = run_timing(
        n_obs=tuple(config.get("n_obs", (2000, 10000, 50000))),
        n_components=tuple(config.get("n_components", (4, 8))),
        n_predictors=tuple(config.get("n_predictors", (5, 9))),
        reps=int(config.get("reps", 10)),
        seed=int(config.get("seed", 0)),
        include_variance=bool(config.get("include_variance", False)),
    )
    rows = [c.as_dict() for c in cells]
    header = list(rows[0])
    _emit_table(config, header, [[r[h] for h in header] for r in rows], {"cells": rows})
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "bootstrap": cmd_bootstrap,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "bench": cmd_bench,
}


def _describe(exc, config):
    where = exc.where
    names = config.get("_component_names")
    if isinstance(where, int) and names and where < len(names):
        where = f"component {where} ({names[where]})"
    elif isinstance(where, tuple) and names:
        where = f"pair {where} ({', '.join(names[i] for i in where)})"
    parts = [f"estimation failed in stage {exc.stage}" if exc.stage else "estimation failed"]
    if where is not None:
        parts.append(f"at {where}")
    return " ".join(parts) + f": {exc}"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {}
    try:
        config = _load_config(args)
        if config.get("shared_coef") and isinstance(config["shared_coef"], str):
            load_mapping(config["shared_coef"])
        return COMMANDS[args.command](config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT
    except EstimationError as exc:
        print(f"error: {_describe(exc, config)}", file=sys.stderr)
        return EXIT_ESTIMATION
    except NumericError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
