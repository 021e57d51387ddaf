"""Case-resampling bootstrap for the two-stage estimator."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import fit
from .exceptions import EstimationError, InputError, NumericError

__all__ = ["BootstrapResult", "replicate_rng", "bootstrap_se"]

MAX_FAILED_FRACTION = 0.2


@dataclass(frozen=True)
class BootstrapResult:
    se: np.ndarray
    estimates: np.ndarray
    replicate_ids: np.ndarray
    failures: tuple
    requested: int
    param_names: tuple

    @property
    def n_ok(self):
        return self.estimates.shape[0]

    @property
    def n_failed(self):
        return len(self.failures)


def replicate_rng(seed, r):
    """Independent generator for replicate ``r``; does not depend on scheduling."""
    return np.random.default_rng([int(seed), int(r)])


def bootstrap_se(model, replicates=250, seed=0, n_jobs=1):
    """Bootstrap standard deviations of every parameter by row resampling.

    Each replicate draws N rows with replacement, refits both stages and
    records ``FitResult.params``. Replicates whose fit fails are excluded
    and listed in ``failures``.

    Raises
    ------
    InputError
        If ``replicates < 2``.
    EstimationError
        If more than 20% of replicates fail.
    """
    if int(replicates) != replicates or replicates < 2:
        raise InputError("bootstrap needs at least 2 replicates")
    replicates = int(replicates)
    N = model.n_obs
    names = None

    def one(r):
        rows = replicate_rng(seed, r).integers(0, N, size=N)
        try:
            res = fit(model.subset_rows(rows), compute_cov=False)
        except (EstimationError, NumericError) as exc:
            return r, None, str(exc)
        return r, res, None

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(one, range(replicates)))
    else:
        outcomes = [one(r) for r in range(replicates)]

    ests, ids, failures = [], [], []
    for r, res, err in outcomes:
        if res is None:
            failures.append((r, err))
        else:
            names = res.param_names
            ests.append(res.params)
            ids.append(r)
    if len(failures) > MAX_FAILED_FRACTION * replicates:
        raise EstimationError(
            f"{len(failures)} of {replicates} bootstrap replicates failed; the model is unstable",
            diagnostics={"failures": failures[:10]},
        )
    ests = np.array(ests)
    return BootstrapResult(
        se=ests.std(axis=0, ddof=1),
        estimates=ests,
        replicate_ids=np.array(ids),
        failures=tuple(failures),
        requested=replicates,
        param_names=names,
    )
