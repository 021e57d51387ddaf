"""Two-stage composite likelihood estimator and its scikit-learn wrapper."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import EstimationError, InputError
from .model import MvpModel
from .options import SolverOptions
from .numerics import norm_cdf, norm_logcdf
from .stage1 import fit_pooled_probit, fit_uni_probit
from .stage2 import assemble_correlation, fit_pair_rho_index, pair_loglik_index
from .variance import SandwichBlocks, assemble_blocks, per_obs_scores, robust_cov

__all__ = ["FitResult", "fit", "fit_stage1", "fit_stage2", "composite_loglik", "MultivariateProbit"]


def _map(fn, items, n_jobs):
    items = list(items)
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class FitResult:
    """Estimates, per-stage diagnostics and the robust covariance.

    Parameters in ``robust_cov`` are ordered as the stage-1 vector
    (``vec(B)`` by component, or the shared coefficients) followed by the
    correlations in lexicographic ``(j, k)`` order.
    """

    B_hat: np.ndarray
    Sigma_hat: np.ndarray
    theta1: np.ndarray
    stage1: tuple
    stage2: tuple
    pairs: tuple
    n_obs: int
    shared: bool
    param_names: tuple
    robust_cov: np.ndarray | None = None
    blocks: SandwichBlocks | None = None
    timings: dict = field(default_factory=dict)

    @property
    def rho(self):
        return np.array([pf.rho for pf in self.stage2])

    @property
    def params(self):
        return np.concatenate([self.theta1, self.rho])

    @property
    def stderr(self):
        if self.robust_cov is None:
            return None
        return np.sqrt(np.diag(self.robust_cov))

    @property
    def stage1_loglik(self):
        return float(sum(f.loglik for f in self.stage1))

    @property
    def stage2_loglik(self):
        return float(sum(p.loglik for p in self.stage2))

    @property
    def min_eigenvalue(self):
        """Smallest eigenvalue of the (unrepaired) correlation estimate."""
        return float(np.linalg.eigvalsh(self.Sigma_hat)[0])

    @property
    def boundary_pairs(self):
        return [(p.j, p.k) for p in self.stage2 if p.boundary_flag]


def _param_names(model):
    feats = model.feature_names
    comps = model.component_names
    if model.shared:
        names = [f"beta[{f}]" for f in feats]
    else:
        names = [f"beta[{f},{c}]" for c in comps for f in feats]
    names += [f"rho[{comps[j]},{comps[k]}]" for j, k in model.pairs]
    return tuple(names)


def fit_stage1(model):
    """Stage-1 fits: one pooled probit (shared layout) or one per component."""
    opts = model.options
    if model.shared:
        return (fit_pooled_probit(model.designs, model.Y, model.component_weights, opts),)

    def one(k):
        w = model.component_weights[k]
        sw = None if w == 1.0 else np.full(model.n_obs, w)
        return fit_uni_probit(model.X, model.Y[:, k], opts, sample_weight=sw, component=k)

    return tuple(_map(one, range(model.n_components), opts.n_jobs))


def fit_stage2(model, B):
    """Independent one-dimensional correlation fits for every pair."""
    A = model.linear_predictors(B)
    Y = model.Y

    def one(m_pair):
        m, (j, k) = m_pair
        try:
            return fit_pair_rho_index(
                A[:, j], A[:, k], Y[:, j], Y[:, k], model.options, j, k, model.pair_weights[m]
            )
        except EstimationError:
            raise
        except Exception as exc:  # numeric trouble inside the search
            raise EstimationError(f"pair ({j}, {k}) failed: {exc}", stage=2, where=(j, k)) from exc

    return tuple(_map(one, enumerate(model.pairs), model.options.n_jobs))


def fit(model, compute_cov=True):
    """Run both estimation stages and, optionally, the robust covariance.

    Raises
    ------
    EstimationError
        With ``stage`` and ``where`` identifying the failing component or pair.
    NumericError
        If the sandwich blocks are singular.
    """
    t0 = time.perf_counter()
    stage1 = fit_stage1(model)
    theta1 = np.concatenate([f.beta for f in stage1])
    B = model.coef_matrix(theta1)
    t1 = time.perf_counter()
    stage2 = fit_stage2(model, B)
    Sigma = assemble_correlation(model.n_components, stage2)
    t2 = time.perf_counter()
    result = FitResult(
        B_hat=B,
        Sigma_hat=Sigma,
        theta1=theta1,
        stage1=stage1,
        stage2=stage2,
        pairs=tuple(model.pairs),
        n_obs=model.n_obs,
        shared=model.shared,
        param_names=_param_names(model),
        timings={"stage1": t1 - t0, "stage2": t2 - t1},
    )
    if not compute_cov:
        return result
    S1, S2 = per_obs_scores(result, model)
    blocks = assemble_blocks(S1, S2, result, model)
    cov = robust_cov(blocks)
    t3 = time.perf_counter()
    timings = dict(result.timings, variance=t3 - t2)
    return FitResult(**{**result.__dict__, "robust_cov": cov, "blocks": blocks, "timings": timings})


def composite_loglik(theta, model):
    """Weighted stage totals ``(sum_k w_k lnL_k, sum_jk w_jk lnL_jk)`` at ``theta = (B, Sigma)``."""
    B, Sigma = theta
    A = model.linear_predictors(B)
    Y = model.Y
    Sigma = np.asarray(Sigma, dtype=float)
    stage1 = 0.0
    for k in range(model.n_components):
        stage1 += model.component_weights[k] * float(norm_logcdf((2.0 * Y[:, k] - 1.0) * A[:, k]).sum())
    stage2 = 0.0
    for m, (j, k) in enumerate(model.pairs):
        stage2 += pair_loglik_index(Sigma[j, k], A[:, j], A[:, k], Y[:, j], Y[:, k], model.pair_weights[m])
    return float(stage1), float(stage2)


class MultivariateProbit(BaseEstimator):
    """Multivariate probit fitted by two-stage composite likelihood.

    Stage 1 fits a univariate probit per response column; stage 2 fits each
    pairwise latent correlation with the stage-1 coefficients held fixed.
    Standard errors come from the two-stage sandwich covariance.

    Parameters
    ----------
    fit_intercept : bool, default=True
        Prepend a column of ones to ``X``.
    gtol, max_iter, separation_threshold, rho_eps, rho_xtol : see :class:`SolverOptions`
    component_weights, pair_weights : array-like, optional
        Composite-likelihood weights (default all ones).
    compute_cov : bool, default=True
        Compute the robust covariance after fitting.
    n_jobs : int, default=1

    Attributes
    ----------
    coef_ : ndarray of shape (n_features_out, n_components)
    corr_ : ndarray of shape (n_components, n_components)
    cov_ : ndarray
        Robust covariance of ``params_``.
    stderr_ : ndarray
    params_ : ndarray
    fit_result_ : FitResult

    Notes
    -----
    Passing a 3-D ``X`` of shape (n_samples, n_components, n_features) fits a
    model in which all components share one coefficient vector, each using
    its own design rows.
    """

    def __init__(
        self,
        fit_intercept=True,
        gtol=1e-8,
        max_iter=100,
        separation_threshold=1e4,
        rho_eps=1e-6,
        rho_xtol=1e-8,
        component_weights=None,
        pair_weights=None,
        compute_cov=True,
        n_jobs=1,
    ):
        self.fit_intercept = fit_intercept
        self.gtol = gtol
        self.max_iter = max_iter
        self.separation_threshold = separation_threshold
        self.rho_eps = rho_eps
        self.rho_xtol = rho_xtol
        self.component_weights = component_weights
        self.pair_weights = pair_weights
        self.compute_cov = compute_cov
        self.n_jobs = n_jobs

    def _options(self):
        return SolverOptions(
            gtol=self.gtol,
            max_iter=self.max_iter,
            separation_threshold=self.separation_threshold,
            rho_eps=self.rho_eps,
            rho_xtol=self.rho_xtol,
            n_jobs=self.n_jobs or 1,
        )

    def _design(self, X, n_components=None):
        X = np.asarray(X, dtype=float) if not hasattr(X, "iloc") else X
        if np.ndim(X) == 3:
            X = np.asarray(X, dtype=float)
            if not np.all(np.isfinite(X)):
                raise InputError("X contains missing or non-finite values")
            if self.fit_intercept:
                X = np.concatenate([np.ones(X.shape[:2] + (1,)), X], axis=2)
            return np.transpose(X, (1, 0, 2))
        X = check_array(X, dtype=float)
        if self.fit_intercept:
            X = np.column_stack([np.ones(X.shape[0]), X])
        return X

    def _model(self, X, Y):
        Y = check_array(Y, dtype=float, ensure_2d=False)
        if Y.ndim == 1:
            Y = Y[:, None]
        D = self._design(X)
        kwargs = dict(
            Y=Y,
            component_weights=self.component_weights,
            pair_weights=self.pair_weights,
            options=self._options(),
        )
        if D.ndim == 3:
            return MvpModel(designs=D, **kwargs)
        return MvpModel(X=D, **kwargs)

    def fit(self, X, Y):
        """Fit to predictors ``X`` and an (n_samples, n_components) binary ``Y``."""
        model = self._model(X, Y)
        res = fit(model, compute_cov=self.compute_cov)
        self.fit_result_ = res
        self.n_components_ = model.n_components
        self.n_features_in_ = model.n_features - int(self.fit_intercept)
        self.shared_ = model.shared
        self.coef_ = res.B_hat
        self.corr_ = res.Sigma_hat
        self.params_ = res.params
        self.cov_ = res.robust_cov
        self.stderr_ = res.stderr
        return self

    def decision_function(self, X):
        """Latent linear predictors, shape (n_samples, n_components)."""
        check_is_fitted(self, "coef_")
        D = self._design(X)
        if D.ndim == 3:
            return np.einsum("knp,pk->nk", D, self.coef_)
        if D.shape[1] != self.coef_.shape[0]:
            raise ValueError(f"X has {D.shape[1] - int(self.fit_intercept)} features, expected {self.n_features_in_}")
        return D @ self.coef_

    def predict_proba(self, X):
        """Marginal probabilities P(y_k = 1 | x) for each component."""
        return norm_cdf(self.decision_function(X))

    def predict(self, X):
        return (self.decision_function(X) >= 0).astype(int)

    def score(self, X, Y):
        """Mean composite log-likelihood (stage-1 plus stage-2 terms) per observation."""
        check_is_fitted(self, "coef_")
        model = self._model(X, Y)
        s1, s2 = composite_loglik((self.coef_, self.corr_), model)
        return (s1 + s2) / model.n_obs
