"""Ground truth for checking the two-stage estimator.

Contains a data simulator, multivariate normal rectangle probabilities
(separation-of-variables integrand with randomized scrambled Sobol
points), the full multivariate probit log-likelihood, and a brute-force
full-likelihood maximizer for tiny problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special
from scipy.stats import qmc

from .exceptions import InputError, NumericError
from .model import MvpModel
from .numerics import bvn_cdf, safe_log

__all__ = [
    "SimSpec",
    "simulate_y",
    "mvn_rect_prob",
    "full_loglik",
    "TinyMLE",
    "full_mle_tiny",
    "MAX_RECT_DIM",
]

MAX_RECT_DIM = 6


def _check_corr(Sigma, min_eig=1e-8):
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
        raise InputError("Sigma must be a square matrix")
    if not np.allclose(Sigma, Sigma.T, atol=1e-12):
        raise InputError("Sigma must be symmetric")
    if np.linalg.eigvalsh(Sigma)[0] <= min_eig:
        raise NumericError("Sigma is not positive definite")
    return Sigma


@dataclass(frozen=True)
class SimSpec:
    """Parameters for simulating multivariate probit responses.

    ``Sigma`` must be a positive definite correlation matrix.
    """

    B: np.ndarray
    Sigma: np.ndarray
    X: np.ndarray
    seed: int = 0

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        X = np.asarray(self.X, dtype=float)
        Sigma = _check_corr(self.Sigma)
        if not np.allclose(np.diag(Sigma), 1.0, atol=1e-12):
            raise InputError("Sigma must have a unit diagonal")
        if X.ndim != 2 or B.ndim != 2 or X.shape[1] != B.shape[0] or B.shape[1] != Sigma.shape[0]:
            raise InputError("SimSpec dimensions disagree: need X (N, P), B (P, K), Sigma (K, K)")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Sigma", Sigma)


def simulate_y(spec, rng=None):
    """Draw responses: ``y_ik = 1`` iff ``z_ik <= x_i beta_k`` with ``z_i ~ N(0, Sigma)``.

    Uses ``np.random.default_rng(spec.seed)`` unless ``rng`` is given.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    L = np.linalg.cholesky(spec.Sigma)
    n, K = spec.X.shape[0], spec.Sigma.shape[0]
    z = rng.standard_normal((n, K)) @ L.T
    return (z <= spec.X @ spec.B).astype(float)


def _interval_prob(a, b):
    """Phi(b) - Phi(a) computed in the tail that keeps precision."""
    upper = a > 0
    return np.where(upper, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))


def _sov_batch(lower, upper, L, W):
    """Separation-of-variables integrand averaged over points ``W`` (n, K-1)."""
    nb, K = lower.shape
    diag = np.diag(L)
    d_arg = lower[:, :1] / diag[0]
    e_arg = upper[:, :1] / diag[0]
    f = np.broadcast_to(_interval_prob(d_arg, e_arg), (nb, W.shape[0])).copy()
    d = special.ndtr(d_arg)
    e = special.ndtr(e_arg)
    ys = []
    for i in range(1, K):
        u = d + W[None, :, i - 1] * (e - d)
        ys.append(special.ndtri(np.clip(u, 1e-300, 1.0 - 1e-16)))
        s = sum(L[i, j] * ys[j] for j in range(i))
        d_arg = (lower[:, i : i + 1] - s) / diag[i]
        e_arg = (upper[:, i : i + 1] - s) / diag[i]
        f *= _interval_prob(d_arg, e_arg)
        d = special.ndtr(d_arg)
        e = special.ndtr(e_arg)
    return f.mean(axis=1)


def _bvn_rect(lower, upper, r):
    a1, a2 = lower[:, 0], lower[:, 1]
    b1, b2 = upper[:, 0], upper[:, 1]
    p = bvn_cdf(b1, b2, r) - bvn_cdf(a1, b2, r) - bvn_cdf(b1, a2, r) + bvn_cdf(a1, a2, r)
    return np.clip(p, 0.0, 1.0)


def _trivariate_quad(lower, upper, corr, n_nodes):
    """K = 3 by conditioning on the first coordinate.

    Integrates the conditional bivariate rectangle probability over
    ``u = Phi(z1)`` with Gauss-Legendre nodes.
    """
    r12, r13, r23 = corr[0, 1], corr[0, 2], corr[1, 2]
    s2 = np.sqrt(1.0 - r12 * r12)
    s3 = np.sqrt(1.0 - r13 * r13)
    rc = (r23 - r12 * r13) / (s2 * s3)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    u_lo = special.ndtr(lower[:, :1])
    u_hi = special.ndtr(upper[:, :1])
    half = 0.5 * (u_hi - u_lo)
    u = u_lo + half * (x + 1.0)
    z = special.ndtri(np.clip(u, 1e-300, 1.0 - 1e-16))
    lo = np.stack([(lower[:, 1:2] - r12 * z) / s2, (lower[:, 2:3] - r13 * z) / s3], axis=-1)
    hi = np.stack([(upper[:, 1:2] - r12 * z) / s2, (upper[:, 2:3] - r13 * z) / s3], axis=-1)
    inner = _bvn_rect(lo.reshape(-1, 2), hi.reshape(-1, 2), rc).reshape(z.shape)
    return half[:, 0] * (inner @ w)


def mvn_rect_prob(lower, upper, Sigma, n_points=2**14, n_randomizations=8, seed=12345, method="auto"):
    """P(lower <= Z <= upper) for Z ~ N(0, Sigma), K <= 6.

    ``lower`` and ``upper`` are (K,) or (n_rect, K) arrays and may contain
    infinities. ``method="qmc"`` always integrates with randomized QMC;
    ``"auto"`` uses closed forms for K <= 2 and QMC above; ``"quad"`` (K = 3
    only) uses deterministic one-dimensional quadrature with ``n_points``
    Gauss-Legendre nodes (capped at 256).

    Returns
    -------
    prob, err : float or ndarray
        Estimate and a standard error across the independent scrambles
        (zero for the closed forms).
    """
    Sigma = _check_corr(Sigma)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    single = lower.ndim == 1
    lower = np.atleast_2d(lower)
    upper = np.atleast_2d(upper)
    K = Sigma.shape[0]
    if K > MAX_RECT_DIM:
        raise InputError(f"rectangle probabilities are supported for K <= {MAX_RECT_DIM}, got {K}")
    if lower.shape != upper.shape or lower.shape[1] != K:
        raise InputError("limits must have K columns matching Sigma")
    if method not in ("auto", "qmc", "quad"):
        raise ValueError("method must be 'auto', 'qmc' or 'quad'")
    if method == "quad" and K != 3:
        raise InputError("method='quad' is only available for K = 3")
    sd = np.sqrt(np.diag(Sigma))
    corr = Sigma / np.outer(sd, sd)
    lower = lower / sd
    upper = upper / sd
    if K == 1:
        prob = _interval_prob(lower[:, 0], upper[:, 0])
        err = np.zeros_like(prob)
    elif K == 2 and method == "auto":
        prob = _bvn_rect(lower, upper, corr[0, 1])
        err = np.zeros_like(prob)
    elif method == "quad":
        prob = np.clip(_trivariate_quad(lower, upper, corr, min(int(n_points), 256)), 0.0, 1.0)
        err = np.zeros_like(prob)
    else:
        L = np.linalg.cholesky(corr)
        streams = np.random.SeedSequence(seed).spawn(n_randomizations)
        m = int(np.ceil(np.log2(max(n_points, 2))))
        chunk = max(1, int(4_000_000 // (2**m)))
        ests = np.empty((n_randomizations, lower.shape[0]))
        for r, ss in enumerate(streams):
            W = qmc.Sobol(d=K - 1, scramble=True, seed=np.random.default_rng(ss)).random_base2(m)
            for start in range(0, lower.shape[0], chunk):
                sl = slice(start, start + chunk)
                ests[r, sl] = _sov_batch(lower[sl], upper[sl], L, W)
        prob = ests.mean(axis=0)
        err = ests.std(axis=0, ddof=1) / np.sqrt(n_randomizations) if n_randomizations > 1 else np.zeros_like(prob)
    if single:
        return float(prob[0]), float(err[0])
    return prob, err


def _regions(A, Y):
    lower = np.where(Y == 1, -np.inf, A)
    upper = np.where(Y == 1, A, np.inf)
    return lower, upper


def full_loglik(B, Sigma, model, n_points=2**14, n_randomizations=8, seed=12345, method="auto", return_error=False):
    """Full multivariate probit log-likelihood ``sum_i log P(z_i in A_i)``.

    Observations with identical regions are integrated once. With
    ``return_error=True`` also returns a standard error for the total.
    """
    K = model.n_components
    if K > MAX_RECT_DIM:
        raise InputError(f"full likelihood is supported for K <= {MAX_RECT_DIM}")
    A = model.linear_predictors(B)
    lower, upper = _regions(A, model.Y)
    key = np.concatenate([lower, upper], axis=1)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    prob, err = mvn_rect_prob(
        uniq[:, :K], uniq[:, K:], Sigma, n_points=n_points, n_randomizations=n_randomizations, seed=seed, method=method
    )
    counts = np.bincount(inverse.reshape(-1), minlength=uniq.shape[0])
    total = float(counts @ safe_log(prob))
    if return_error:
        se = float(np.sqrt(np.sum((counts * err / np.maximum(prob, 1e-300)) ** 2)))
        return total, se
    return total


@dataclass(frozen=True)
class TinyMLE:
    B: np.ndarray
    Sigma: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    message: str


def _corr_from_z(z, K):
    Sigma = np.eye(K)
    iu = np.triu_indices(K, 1)
    Sigma[iu] = np.tanh(z)
    Sigma[(iu[1], iu[0])] = np.tanh(z)
    return Sigma


def full_mle_tiny(model, start=None, n_nodes=48, gtol=1e-5):
    """Maximize the full log-likelihood directly (BFGS on coefficients and atanh(rho)).

    Restricted to K <= 3, P <= 2, N <= 2000 and the separate-coefficient
    layout. K = 3 probabilities use the deterministic conditioning
    quadrature with ``n_nodes`` nodes so the objective is smooth.
    ``start`` is an optional ``(B, Sigma)``; the default start is all zeros.
    """
    if not isinstance(model, MvpModel) or model.shared:
        raise InputError("full_mle_tiny needs a separate-coefficient MvpModel")
    K, P, N = model.n_components, model.n_features, model.n_obs
    if K > 3 or P > 2 or N > 2000:
        raise InputError(f"full_mle_tiny supports K <= 3, P <= 2, N <= 2000 (got K={K}, P={P}, N={N})")
    M = K * (K - 1) // 2
    if start is None:
        x0 = np.zeros(P * K + M)
    else:
        B0, S0 = start
        iu = np.triu_indices(K, 1)
        x0 = np.concatenate([np.asarray(B0, float).T.reshape(-1), np.arctanh(np.asarray(S0, float)[iu])])

    def unpack(x):
        return x[: P * K].reshape(K, P).T, _corr_from_z(x[P * K :], K)

    def objective(x):
        B, Sigma = unpack(x)
        if K > 1 and np.linalg.eigvalsh(Sigma)[0] <= 1e-8:
            return 1e10
        return -full_loglik(B, Sigma, model, n_points=n_nodes, method="quad" if K == 3 else "auto")

    res = optimize.minimize(objective, x0, method="BFGS", options={"gtol": gtol, "maxiter": 500})
    B, Sigma = unpack(res.x)
    grad_ok = res.jac is not None and np.max(np.abs(res.jac)) < 1e-3 * max(1.0, abs(res.fun))
    return TinyMLE(
        B=B,
        Sigma=Sigma,
        loglik=-float(res.fun),
        converged=bool(res.success or grad_ok),
        n_iter=int(res.nit),
        message=str(res.message),
    )
