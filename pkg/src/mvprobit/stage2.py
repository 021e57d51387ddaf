"""Stage 2: one bivariate-probit correlation per component pair.

Each pair (j, k) is fitted by a one-dimensional bounded search over the
correlation with the stage-1 coefficients held fixed. The pairs share no
parameters, so the joint maximization is exactly a set of independent
scalar problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .exceptions import ConvergenceError
from .numerics import bvn_cdf, bvn_pdf, norm_pdf, safe_log
from .options import SolverOptions

__all__ = [
    "PairFit",
    "pair_cell_prob",
    "pair_loglik",
    "pair_loglik_index",
    "pair_rho_derivatives",
    "moment_start",
    "fit_pair_rho",
    "fit_pair_rho_index",
    "assemble_correlation",
    "nearest_correlation",
]


@dataclass(frozen=True)
class PairFit:
    j: int
    k: int
    rho: float
    loglik: float
    converged: bool
    boundary_flag: bool
    n_evaluations: int = 0
    start: float = 0.0


def pair_cell_prob(y_j, y_k, a_j, a_k, rho):
    """Probability of the observed 2x2 cell ``(y_j, y_k)``.

    With ``q = 2y - 1`` the cell probability is
    ``bvn_cdf(q_j a_j, q_k a_k, q_j q_k rho)``.
    """
    q_j = 2.0 * np.asarray(y_j, dtype=float) - 1.0
    q_k = 2.0 * np.asarray(y_k, dtype=float) - 1.0
    return bvn_cdf(q_j * np.asarray(a_j, dtype=float), q_k * np.asarray(a_k, dtype=float), q_j * q_k * rho)


def pair_loglik_index(rho, a_j, a_k, y_j, y_k, weight=1.0):
    """Pairwise log-likelihood given the two linear predictors."""
    return weight * float(safe_log(pair_cell_prob(y_j, y_k, a_j, a_k, rho)).sum())


def _indices(X, beta_j, beta_k, X_k=None):
    X = np.asarray(X, dtype=float)
    X_k = X if X_k is None else np.asarray(X_k, dtype=float)
    beta_j = np.asarray(beta_j, dtype=float)
    beta_k = np.asarray(beta_k, dtype=float)
    if X.ndim != 2 or X.shape[1] != beta_j.shape[0] or X_k.shape[1] != beta_k.shape[0]:
        raise ValueError("design and coefficient dimensions disagree")
    if X_k.shape[0] != X.shape[0]:
        raise ValueError("designs have different numbers of rows")
    return X @ beta_j, X_k @ beta_k


def _check_y(y, n):
    y = np.asarray(y, dtype=float)
    if y.shape != (n,):
        raise ValueError(f"response must have shape ({n},), got {y.shape}")
    return y


def pair_loglik(rho, X, y_j, y_k, beta_j, beta_k, X_k=None, weight=1.0):
    """Bivariate-probit log-likelihood of one pair at correlation ``rho``.

    ``X_k`` gives a separate design for the second component (shared
    coefficient models); by default both components use ``X``.
    """
    a_j, a_k = _indices(X, beta_j, beta_k, X_k)
    n = a_j.shape[0]
    return pair_loglik_index(rho, a_j, a_k, _check_y(y_j, n), _check_y(y_k, n), weight)


def pair_rho_derivatives(rho, a_j, a_k, y_j, y_k):
    """Per-observation derivatives of the pair log-likelihood.

    Returns
    -------
    d_rho : ndarray
        d log P / d rho (uses d Phi2 / d rho = phi2).
    d2_rho : ndarray
        d^2 log P / d rho^2.
    d_rho_aj, d_rho_ak : ndarray
        Mixed partials d^2 log P / (d rho d a_j) and (d rho d a_k).
    """
    a_j = np.asarray(a_j, dtype=float)
    a_k = np.asarray(a_k, dtype=float)
    q_j = 2.0 * np.asarray(y_j, dtype=float) - 1.0
    q_k = 2.0 * np.asarray(y_k, dtype=float) - 1.0
    s = q_j * q_k
    one_m = (1.0 - rho) * (1.0 + rho)
    root = np.sqrt(one_m)
    p = np.maximum(bvn_cdf(q_j * a_j, q_k * a_k, s * rho), 1e-300)
    phi2 = bvn_pdf(a_j, a_k, rho)
    quad = (a_j * a_j - 2.0 * rho * a_j * a_k + a_k * a_k) / one_m
    dphi2_drho = phi2 * (rho + a_j * a_k - rho * quad) / one_m
    g = s * phi2 / p
    d2 = s * dphi2_drho / p - g * g

    dp_daj = q_j * norm_pdf(a_j) * special.ndtr(q_k * (a_k - rho * a_j) / root)
    dp_dak = q_k * norm_pdf(a_k) * special.ndtr(q_j * (a_j - rho * a_k) / root)
    dphi2_daj = -phi2 * (a_j - rho * a_k) / one_m
    dphi2_dak = -phi2 * (a_k - rho * a_j) / one_m
    d_aj = s * (dphi2_daj - phi2 * dp_daj / p) / p
    d_ak = s * (dphi2_dak - phi2 * dp_dak / p) / p
    return g, d2, d_aj, d_ak


def moment_start(y_j, y_k):
    """Starting correlation ``sin(2 pi (p11 - p1 p2))`` clipped to [-0.5, 0.5].

    Falls back to 0 when a margin is degenerate.
    """
    y_j = np.asarray(y_j, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    p1, p2 = y_j.mean(), y_k.mean()
    if p1 in (0.0, 1.0) or p2 in (0.0, 1.0):
        return 0.0
    p11 = float(np.mean(y_j * y_k))
    return float(np.clip(np.sin(2.0 * np.pi * (p11 - p1 * p2)), -0.5, 0.5))


def _bracket(f, z0, zmax, step=0.25):
    """Expand from ``z0`` in the uphill direction of ``f`` (a minimand)."""
    f0 = f(z0)
    fr = f(min(z0 + step, zmax))
    if fr < f0:
        lo, x, fx = z0, min(z0 + step, zmax), fr
        direction = 1.0
    else:
        fl = f(max(z0 - step, -zmax))
        if fl >= f0:
            return max(z0 - step, -zmax), min(z0 + step, zmax)
        lo, x, fx = z0, max(z0 - step, -zmax), fl
        direction = -1.0
    while abs(x) < zmax:
        step *= 2.0
        nxt = float(np.clip(x + direction * step, -zmax, zmax))
        fn = f(nxt)
        if fn >= fx:
            return (lo, nxt) if direction > 0 else (nxt, lo)
        lo, x, fx = x, nxt, fn
    return (lo, x) if direction > 0 else (x, lo)


def fit_pair_rho_index(a_j, a_k, y_j, y_k, opts=None, j=0, k=1, weight=1.0):
    """Maximize the pair log-likelihood over rho given linear predictors.

    The search runs on the ``atanh(rho)`` scale inside
    ``[-1 + eps, 1 - eps]``: an expanding bracket from the moment start,
    then bounded Brent (golden section with parabolic steps).
    """
    opts = opts or SolverOptions()
    a_j = np.asarray(a_j, dtype=float)
    a_k = np.asarray(a_k, dtype=float)
    y_j = np.asarray(y_j, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    q_j = 2.0 * y_j - 1.0
    q_k = 2.0 * y_k - 1.0
    h = q_j * a_j
    kk = q_k * a_k
    s = q_j * q_k
    rho_max = 1.0 - opts.rho_eps
    zmax = float(np.arctanh(rho_max))
    n_eval = 0

    def negll_rho(rho):
        nonlocal n_eval
        n_eval += 1
        return -float(safe_log(bvn_cdf(h, kk, s * rho)).sum())

    def negll(z):
        return negll_rho(float(np.clip(np.tanh(z), -rho_max, rho_max)))

    start = moment_start(y_j, y_k)
    lo, hi = _bracket(negll, float(np.arctanh(start)), zmax)
    res = optimize.minimize_scalar(
        negll, bounds=(lo, hi), method="bounded", options={"xatol": opts.rho_xtol, "maxiter": 500}
    )
    if not res.success or not np.isfinite(res.fun):
        raise ConvergenceError(
            f"correlation search failed for pair ({j}, {k}): {res.message}",
            stage=2,
            where=(j, k),
            diagnostics={"bracket": [lo, hi], "x": float(res.x), "nfev": int(res.nfev)},
        )
    rho = float(np.clip(np.tanh(res.x), -rho_max, rho_max))
    fun = float(res.fun)
    boundary = rho_max - abs(rho) <= opts.boundary_tol
    if boundary:
        clamp = float(np.copysign(rho_max, rho))
        f_clamp = negll_rho(clamp)
        if f_clamp <= fun:
            rho, fun = clamp, f_clamp
    return PairFit(
        j=j,
        k=k,
        rho=rho,
        loglik=-weight * fun,
        converged=True,
        boundary_flag=bool(boundary),
        n_evaluations=n_eval,
        start=start,
    )


def fit_pair_rho(X, y_j, y_k, beta_j, beta_k, opts=None, j=0, k=1, X_k=None, weight=1.0):
    """Fit the correlation of one component pair with fixed coefficients."""
    a_j, a_k = _indices(X, beta_j, beta_k, X_k)
    n = a_j.shape[0]
    return fit_pair_rho_index(a_j, a_k, _check_y(y_j, n), _check_y(y_k, n), opts, j, k, weight)


def assemble_correlation(n_components, pair_fits):
    """Symmetric unit-diagonal matrix from pair fits; no PD repair."""
    sigma = np.eye(n_components)
    for pf in pair_fits:
        sigma[pf.j, pf.k] = sigma[pf.k, pf.j] = pf.rho
    return sigma


def nearest_correlation(sigma, tol=1e-10, max_iter=1000):
    """Nearest correlation matrix by alternating projections with Dykstra's correction.

    Intended only for downstream simulation use; estimates themselves are
    never projected.
    """
    y = np.array(sigma, dtype=float)
    y = 0.5 * (y + y.T)
    correction = np.zeros_like(y)
    for _ in range(max_iter):
        r = y - correction
        vals, vecs = np.linalg.eigh(r)
        x = (vecs * np.maximum(vals, 0.0)) @ vecs.T
        correction = x - r
        y_new = x.copy()
        np.fill_diagonal(y_new, 1.0)
        if np.linalg.norm(y_new - y, "fro") <= tol * max(1.0, np.linalg.norm(y, "fro")):
            y = y_new
            break
        y = y_new
    return 0.5 * (y + y.T)
