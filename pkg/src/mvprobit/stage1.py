"""Stage 1: independent univariate probit fits, one per response component."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .exceptions import ConvergenceError, RankDeficiencyError, SeparationError
from .options import SolverOptions

__all__ = [
    "UnivariateFit",
    "uni_probit_loglik",
    "uni_score_hessian",
    "fit_uni_probit",
    "fit_pooled_probit",
    "probit_derivatives",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class UnivariateFit:
    """Result of one stage-1 probit fit.

    ``score_per_obs`` has one row per (original) observation and
    ``neg_hessian`` is the negative Hessian averaged over those rows.
    """

    beta: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    score_per_obs: np.ndarray
    neg_hessian: np.ndarray
    component: object = None


def _check_xy(X, y, beta=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError(f"y must be a vector of length {X.shape[0]}, got shape {y.shape}")
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (X.shape[1],):
            raise ValueError(f"beta must have shape ({X.shape[1]},), got {beta.shape}")
    return X, y, beta


def probit_derivatives(a, y):
    """Per-observation log-likelihood and its first two derivatives in the index.

    Returns ``(logp, d1, d2)`` for ``log Phi(q a)`` with ``q = 2y - 1``.
    """
    q = 2.0 * y - 1.0
    m = q * a
    logp = special.log_ndtr(m)
    mills = np.exp(-0.5 * m * m - _LOG_SQRT_2PI - logp)
    return logp, q * mills, -mills * (m + mills)


def uni_probit_loglik(beta, X, y, sample_weight=None):
    """Probit log-likelihood ``sum_i w_i log Phi((2 y_i - 1) x_i beta)``."""
    X, y, beta = _check_xy(X, y, beta)
    logp = special.log_ndtr((2.0 * y - 1.0) * (X @ beta))
    if sample_weight is not None:
        logp = logp * sample_weight
    return float(logp.sum())


def uni_score_hessian(beta, X, y, sample_weight=None):
    """Analytic per-observation scores and the mean negative Hessian.

    Returns
    -------
    score_per_obs : ndarray, shape (N, P)
    neg_hessian_mean : ndarray, shape (P, P)
    """
    X, y, beta = _check_xy(X, y, beta)
    _, d1, d2 = probit_derivatives(X @ beta, y)
    if sample_weight is not None:
        d1 = d1 * sample_weight
        d2 = d2 * sample_weight
    scores = d1[:, None] * X
    neg_h = (X.T * -d2) @ X / X.shape[0]
    return scores, 0.5 * (neg_h + neg_h.T)


def _column_scale(X):
    sd = X.std(axis=0)
    const = sd == 0
    sd[const] = np.abs(X[0, const])
    sd[sd == 0] = 1.0
    return sd


def _newton(X, y, sw, opts, component):
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficiencyError(
            f"design for component {component} is rank deficient", stage=1, where=component
        )
    w = np.ones(n) if sw is None else sw
    if np.all(y[w > 0] == y[w > 0][0]):
        raise SeparationError(
            f"response for component {component} contains a single class", stage=1, where=component
        )
    scale = _column_scale(X)
    beta = np.zeros(p)

    def evaluate(b):
        logp, d1, d2 = probit_derivatives(X @ b, y)
        return float(w @ logp), X.T @ (w * d1), (X.T * (-w * d2)) @ X

    def singular():
        return SeparationError(
            f"information matrix became singular for component {component}; "
            "the response is likely separated",
            stage=1,
            where=component,
        )

    ll, grad, neg_h = evaluate(beta)
    for it in range(1, opts.max_iter + 2):
        try:
            step = linalg.solve(neg_h, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            raise singular() from None
        if not np.all(np.isfinite(step)):
            raise singular()
        if np.max(np.abs(grad)) <= opts.gtol:
            # A vanishing gradient with a large Newton step means the
            # curvature collapsed: coefficients are running off to infinity.
            if np.max(np.abs(step * scale)) > 1e-3:
                raise SeparationError(
                    f"coefficients for component {component} diverge along a flat "
                    "likelihood direction; complete or quasi-complete separation",
                    stage=1,
                    where=component,
                    diagnostics={"beta": beta.tolist(), "newton_step": step.tolist()},
                )
            return beta, ll, it - 1, True
        if it > opts.max_iter:
            break
        decrement = float(grad @ step)
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            ll_c, grad_c, neg_h_c = evaluate(cand)
            if ll_c >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            if decrement < 1e-20 * max(1.0, abs(ll)):
                return beta, ll, it, True
            raise ConvergenceError(
                f"line search failed for component {component}",
                stage=1,
                where=component,
                diagnostics={"iteration": it, "gradient": grad.tolist()},
            )
        beta, ll, grad, neg_h = cand, ll_c, grad_c, neg_h_c
        if np.max(np.abs(beta * scale)) > opts.separation_threshold:
            raise SeparationError(
                f"coefficients for component {component} diverge (|beta| > "
                f"{opts.separation_threshold:g} on standardized scale); "
                "complete or quasi-complete separation",
                stage=1,
                where=component,
                diagnostics={"beta": beta.tolist()},
            )
        if decrement < 1e-20 * max(1.0, abs(ll)) and t == 1.0:
            # already at the floating-point optimum
            return beta, ll, it, True
    raise ConvergenceError(
        f"Newton iterations exhausted for component {component}",
        stage=1,
        where=component,
        diagnostics={"iterations": opts.max_iter, "gradient": grad.tolist(), "beta": beta.tolist()},
    )


def fit_uni_probit(X, y, opts=None, sample_weight=None, component=None):
    """Maximize the probit log-likelihood by damped Newton-Raphson from zero.

    Parameters
    ----------
    X : array_like, shape (N, P)
        Full column rank design.
    y : array_like, shape (N,)
        Binary response containing both classes.
    opts : SolverOptions, optional
    sample_weight : array_like, optional
        Composite-likelihood weights per row (all ones by default).
    component : object, optional
        Label used in error messages.

    Raises
    ------
    RankDeficiencyError, SeparationError, ConvergenceError
    """
    opts = opts or SolverOptions()
    X, y, _ = _check_xy(X, y)
    sw = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
    beta, ll, iters, converged = _newton(X, y, sw, opts, component)
    scores, neg_h = uni_score_hessian(beta, X, y, sw)
    return UnivariateFit(
        beta=beta,
        loglik=ll,
        iterations=iters,
        converged=converged,
        score_per_obs=scores,
        neg_hessian=neg_h,
        component=component,
    )


def fit_pooled_probit(designs, Y, component_weights=None, opts=None):
    """One probit shared by all components, fitted on the stacked design.

    ``designs`` has shape (K, N, Q): component ``k`` uses ``designs[k]`` with
    the same Q coefficients. Scores are summed per original observation and
    the negative Hessian is averaged over the N original observations.
    """
    designs = np.asarray(designs, dtype=float)
    Y = np.asarray(Y, dtype=float)
    K, N, Q = designs.shape
    w = np.ones(K) if component_weights is None else np.asarray(component_weights, dtype=float)
    X_stack = designs.reshape(K * N, Q)
    y_stack = Y.T.reshape(K * N)
    sw = np.repeat(w, N)
    fit = fit_uni_probit(X_stack, y_stack, opts, sample_weight=sw, component="pooled")
    scores = fit.score_per_obs.reshape(K, N, Q).sum(axis=0)
    neg_h = fit.neg_hessian * K
    return UnivariateFit(
        beta=fit.beta,
        loglik=fit.loglik,
        iterations=fit.iterations,
        converged=fit.converged,
        score_per_obs=scores,
        neg_hessian=neg_h,
        component="pooled",
    )
