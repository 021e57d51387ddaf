"""Simulation experiments: Wald-interval coverage and run-time scaling.

The simulated designs use an intercept, standard-normal predictors and one
standardized ternary (genotype-like) column. Intercepts step from -0.2 by
-0.2 per component; the first non-intercept predictor has coefficient 0.5
and the rest 0. The latent correlation is exchangeable (0.3 by default).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import fit
from .exceptions import EstimationError, InputError, NumericError
from .model import MvpModel
from .numerics import norm_quantile
from .verification import SimSpec, simulate_y

__all__ = [
    "simulation_design",
    "exchangeable",
    "CoverageResult",
    "run_coverage",
    "TimingCell",
    "run_timing",
    "REPORTED_TIMING_SECONDS",
]

# Published mean two-stage run time (s) by (N, K, P), measured on a 2.7 GHz laptop.
REPORTED_TIMING_SECONDS = {
    (2000, 4, 5): 0, (2000, 4, 9): 0, (2000, 8, 5): 1, (2000, 8, 9): 1,
    (10000, 4, 5): 1, (10000, 4, 9): 1, (10000, 8, 5): 5, (10000, 8, 9): 5,
    (50000, 4, 5): 6, (50000, 4, 9): 6, (50000, 8, 5): 23, (50000, 8, 9): 23,
}  # fmt: skip

_TERNARY_P = 0.3


def exchangeable(K, rho):
    S = np.full((K, K), float(rho))
    np.fill_diagonal(S, 1.0)
    return S


def simulation_design(n_obs, n_components, n_predictors=4, rho=0.3, seed=0, sigma=None):
    """Design matrix and true parameters for a simulation cell.

    Returns a :class:`SimSpec` whose ``seed`` is unused (responses are drawn
    from explicit generators by the runners).
    """
    if n_predictors < 1 or n_components < 1 or n_obs < 2:
        raise InputError("need n_obs >= 2, n_components >= 1, n_predictors >= 1")
    rng = np.random.default_rng([int(seed), 0])
    cols = [np.ones(n_obs)]
    n_normal = max(n_predictors - 2, 0) if n_predictors >= 3 else n_predictors - 1
    for _ in range(n_normal):
        cols.append(rng.standard_normal(n_obs))
    if n_predictors >= 3:
        g = rng.binomial(2, _TERNARY_P, size=n_obs)
        mean = 2 * _TERNARY_P
        sd = np.sqrt(2 * _TERNARY_P * (1 - _TERNARY_P))
        cols.append((g - mean) / sd)
    X = np.column_stack(cols)
    B = np.zeros((n_predictors, n_components))
    B[0] = -0.2 * np.arange(1, n_components + 1)
    if n_predictors > 1:
        B[1] = 0.5
    Sigma = exchangeable(n_components, rho) if sigma is None else np.asarray(sigma, dtype=float)
    return SimSpec(B=B, Sigma=Sigma, X=X, seed=int(seed))


@dataclass(frozen=True)
class CoverageResult:
    """Coverage percentages; ``coef_coverage[p, k]`` is for predictor p, component k."""

    n_obs: int
    n_components: int
    n_predictors: int
    level: float
    coef_coverage: np.ndarray
    rho_coverage: np.ndarray
    n_ok: int
    n_failed: int
    seconds: float

    def rows(self):
        """One record per coefficient then per correlation, for CSV/JSON tables."""
        out = []
        for k in range(self.n_components):
            for p in range(self.n_predictors):
                out.append(
                    {
                        "n_obs": self.n_obs,
                        "n_components": self.n_components,
                        "parameter": f"B[{k + 1},{p + 1}]",
                        "coverage": float(self.coef_coverage[p, k]),
                    }
                )
        pairs = [(j, k) for j in range(self.n_components) for k in range(j + 1, self.n_components)]
        for (j, k), c in zip(pairs, self.rho_coverage):
            out.append(
                {
                    "n_obs": self.n_obs,
                    "n_components": self.n_components,
                    "parameter": f"rho[{j + 1},{k + 1}]",
                    "coverage": float(c),
                }
            )
        return out


def run_coverage(n_obs, n_components, n_predictors=4, reps=500, level=0.95, seed=0, rho=0.3, n_jobs=1):
    """Fraction (in percent) of replicates whose Wald interval covers the truth.

    The design matrix is drawn once per cell; responses are redrawn for
    every replicate from a generator keyed by ``(seed, 1, rep)``.
    """
    if not 0 < level <= 1:
        raise InputError("level must lie in (0, 1]")
    if reps < 1:
        raise InputError("reps must be >= 1")
    spec = simulation_design(n_obs, n_components, n_predictors, rho, seed)
    z = np.inf if level >= 1 else float(norm_quantile(0.5 + level / 2))
    truth = np.concatenate([spec.B.T.reshape(-1), spec.Sigma[np.triu_indices(n_components, 1)]])
    t0 = time.perf_counter()

    def one(r):
        Y = simulate_y(spec, rng=np.random.default_rng([int(seed), 1, r]))
        try:
            res = fit(MvpModel(Y=Y, X=spec.X))
        except (EstimationError, NumericError):
            return None
        return np.abs(res.params - truth) <= z * res.stderr

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            hits = list(pool.map(one, range(reps)))
    else:
        hits = [one(r) for r in range(reps)]
    ok = [h for h in hits if h is not None]
    if not ok:
        raise EstimationError("every coverage replicate failed")
    pct = 100.0 * np.mean(ok, axis=0)
    q1 = n_predictors * n_components
    return CoverageResult(
        n_obs=n_obs,
        n_components=n_components,
        n_predictors=n_predictors,
        level=level,
        coef_coverage=pct[:q1].reshape(n_components, n_predictors).T,
        rho_coverage=pct[q1:],
        n_ok=len(ok),
        n_failed=reps - len(ok),
        seconds=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class TimingCell:
    n_obs: int
    n_components: int
    n_predictors: int
    reps: int
    mean_seconds: float
    min_seconds: float
    reported_seconds: float | None

    def as_dict(self):
        return dict(self.__dict__)


def run_timing(
    n_obs=(2000, 10000, 50000),
    n_components=(4, 8),
    n_predictors=(5, 9),
    reps=10,
    seed=0,
    rho=0.3,
    include_variance=False,
):
    """Mean wall-clock seconds of a two-stage fit for each grid cell.

    Times parameter estimation (both stages) by default; set
    ``include_variance`` to also time the robust covariance.
    """
    cells = []
    for n in n_obs:
        for K in n_components:
            for P in n_predictors:
                spec = simulation_design(n, K, P, rho, seed)
                times = []
                for r in range(reps):
                    Y = simulate_y(spec, rng=np.random.default_rng([int(seed), 2, n, K, P, r]))
                    model = MvpModel(Y=Y, X=spec.X)
                    t0 = time.perf_counter()
                    fit(model, compute_cov=include_variance)
                    times.append(time.perf_counter() - t0)
                cells.append(
                    TimingCell(
                        n_obs=n,
                        n_components=K,
                        n_predictors=P,
                        reps=reps,
                        mean_seconds=float(np.mean(times)),
                        min_seconds=float(np.min(times)),
                        reported_seconds=REPORTED_TIMING_SECONDS.get((n, K, P)),
                    )
                )
    return cells
