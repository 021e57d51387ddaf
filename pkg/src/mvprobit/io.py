"""CSV ingestion, shared-coefficient mappings and result serialization."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .model import MvpModel
from .options import SolverOptions

__all__ = [
    "INTERCEPT",
    "read_table",
    "numeric_columns",
    "load_mapping",
    "shared_designs",
    "build_model",
    "to_jsonable",
    "dump_json",
    "write_csv",
]

INTERCEPT = "(Intercept)"


def read_table(path):
    """Read a UTF-8, comma-delimited CSV with a header row.

    Returns ``(header, rows)`` where rows are lists of strings. Raises
    :class:`InputError` with the file line number on ragged rows.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise InputError(f"{path}: file is empty (a header row is required)") from None
            if len(set(header)) != len(header):
                raise InputError(f"{path}: duplicate column names in header")
            rows = []
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise InputError(
                        f"{path}:{reader.line_num}: expected {len(header)} fields, found {len(row)}"
                    )
                rows.append((reader.line_num, row))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read file ({exc})") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    return header, rows


def numeric_columns(header, rows, names, path="<data>", binary=False):
    """Extract named columns as a float array, reporting line and column on errors."""
    missing = [n for n in names if n not in header]
    if missing:
        raise InputError(f"{path}: column(s) not found: {', '.join(missing)}")
    cols = [header.index(n) for n in names]
    out = np.empty((len(rows), len(cols)))
    for i, (line, row) in enumerate(rows):
        for j, c in enumerate(cols):
            text = row[c].strip()
            if text == "" or text.upper() in {"NA", "NAN", "NULL"}:
                raise InputError(f"{path}:{line}: missing value in column '{names[j]}'")
            try:
                val = float(text)
            except ValueError:
                raise InputError(f"{path}:{line}: non-numeric value {text!r} in column '{names[j]}'") from None
            if not math.isfinite(val):
                raise InputError(f"{path}:{line}: non-finite value in column '{names[j]}'")
            if binary and val not in (0.0, 1.0):
                raise InputError(
                    f"{path}:{line}: response column '{names[j]}' must be 0 or 1, found {text!r}"
                )
            out[i, j] = val
    return out


def load_mapping(spec):
    """Parse a shared-coefficient mapping from a dict or a JSON file path.

    Expected form::

        {"coefficients": ["b0", "b1"],
         "components": {"0": ["(Intercept)", "age_7"], "1": [...], ...}}

    Each component lists one column per shared coefficient, in order;
    ``"(Intercept)"`` denotes a column of ones.
    """
    if isinstance(spec, (str, Path)):
        try:
            spec = json.loads(Path(spec).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read mapping file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"mapping file is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(spec, dict) or "components" not in spec:
        raise InputError("shared-coefficient mapping must be an object with a 'components' entry")
    comps = spec["components"]
    try:
        keys = sorted(comps, key=int)
    except (TypeError, ValueError):
        raise InputError("mapping component keys must be integer indices") from None
    if [int(k) for k in keys] != list(range(len(keys))):
        raise InputError("mapping must list components 0..K-1 without gaps")
    cols = [list(comps[k]) for k in keys]
    q = len(cols[0])
    if q == 0 or any(len(c) != q for c in cols):
        raise InputError("every component must map the same number of coefficients")
    names = spec.get("coefficients") or [f"b{i}" for i in range(q)]
    if len(names) != q:
        raise InputError("'coefficients' length does not match the component column lists")
    return list(names), cols


def shared_designs(header, rows, columns, path="<data>"):
    """(K, N, Q) design array from per-component column lists."""
    n = len(rows)
    designs = []
    for comp_cols in columns:
        named = [c for c in comp_cols if c != INTERCEPT]
        vals = numeric_columns(header, rows, named, path) if named else np.empty((n, 0))
        block = np.empty((n, len(comp_cols)))
        it = iter(range(vals.shape[1]))
        for q, c in enumerate(comp_cols):
            block[:, q] = 1.0 if c == INTERCEPT else vals[:, next(it)]
        designs.append(block)
    return np.stack(designs)


def _solver_options(config):
    solver = dict(config.get("solver") or {})
    if config.get("threads"):
        solver["n_jobs"] = int(config["threads"])
    try:
        return SolverOptions(**solver)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid solver options: {exc}") from exc


def _weights(config, K):
    w = config.get("weights") or {}
    comp = w.get("components")
    pairs = w.get("pairs")
    if isinstance(pairs, dict):
        vec = np.ones(K * (K - 1) // 2)
        lookup = {(j, k): m for m, (j, k) in enumerate((j, k) for j in range(K) for k in range(j + 1, K))}
        for key, val in pairs.items():
            try:
                j, k = sorted(int(v) for v in str(key).split(","))
                vec[lookup[(j, k)]] = float(val)
            except (KeyError, ValueError):
                raise InputError(f"invalid pair weight key {key!r}; use 'j,k'") from None
        pairs = vec
    return comp, pairs


def build_model(config):
    """Construct an :class:`MvpModel` from a run configuration dict.

    Recognised keys: ``data`` (combined CSV) with ``response`` and
    ``predictors`` column lists, or ``x`` and ``y`` (split files);
    ``intercept`` (default true); ``shared_coef`` (mapping dict or path);
    ``weights``; ``solver``; ``threads``.
    """
    shared = config.get("shared_coef")
    if config.get("data"):
        path = config["data"]
        header, rows = read_table(path)
        response = config.get("response")
        if not response:
            raise InputError("combined-CSV mode requires a 'response' column list")
        Y = numeric_columns(header, rows, list(response), path, binary=True)
        xhead, xrows, xpath = header, rows, path
        predictors = config.get("predictors")
        if predictors is None and not shared:
            predictors = [h for h in header if h not in response]
    elif config.get("x") and config.get("y"):
        yhead, yrows = read_table(config["y"])
        response = config.get("response") or yhead
        Y = numeric_columns(yhead, yrows, list(response), config["y"], binary=True)
        xhead, xrows = read_table(config["x"])
        xpath = config["x"]
        if len(xrows) != len(yrows):
            raise InputError(f"{xpath} has {len(xrows)} rows but {config['y']} has {len(yrows)}")
        predictors = config.get("predictors") or xhead
    else:
        raise InputError("provide either --data or both --x and --y")

    K = Y.shape[1]
    comp_w, pair_w = _weights(config, K)
    common = dict(
        Y=Y,
        component_weights=comp_w,
        pair_weights=pair_w,
        options=_solver_options(config),
        component_names=tuple(response),
    )
    if shared:
        names, columns = load_mapping(shared)
        if len(columns) != K:
            raise InputError(f"mapping lists {len(columns)} components but there are {K} responses")
        designs = shared_designs(xhead, xrows, columns, xpath)
        return MvpModel(designs=designs, feature_names=tuple(names), **common)
    predictors = list(predictors)
    X = numeric_columns(xhead, xrows, predictors, xpath) if predictors else np.empty((len(xrows), 0))
    names = predictors
    if config.get("intercept", True):
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = [INTERCEPT] + predictors
    if X.shape[1] == 0:
        raise InputError("model has no predictors")
    return MvpModel(X=X, feature_names=tuple(names), **common)


def to_jsonable(obj):
    """Recursively convert numpy containers to plain Python for ``json``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if math.isfinite(val) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path=None):
    # float repr is the shortest string that round-trips exactly
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n"
    if path is None:
        return text
    Path(path).write_text(text, encoding="utf-8")
    return text


def write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
