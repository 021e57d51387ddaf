"""Robust two-stage (Murphy-Topel sandwich) covariance for the composite fit.

Notation for the blocks, all plug-in means over the N observations:

* ``V1``: inverse of the mean negative stage-1 Hessian;
* ``V1_star``: mean outer product of stage-1 scores (the meat);
* ``V2`` / ``V2_star``: the same for the stage-2 correlation parameters;
* ``C_star``: mean of ``-d^2 lnL2 / d theta2 d theta1'``;
* ``R``: mean of ``s2_i s1_i'``, the cross product of stage scores.

Because ``V1_star`` already holds the meat, the stage-1 sandwich is
``V1 @ V1_star @ V1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import NumericError
from .stage1 import probit_derivatives
from .stage2 import pair_rho_derivatives

__all__ = [
    "SandwichBlocks",
    "per_obs_scores",
    "assemble_blocks",
    "robust_cov",
    "sym_inverse",
]

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SandwichBlocks:
    V1: np.ndarray
    V1_star: np.ndarray
    V2: np.ndarray
    V2_star: np.ndarray
    C_star: np.ndarray
    R: np.ndarray
    n_obs: int


def sym_inverse(a, name="matrix"):
    """Inverse of a symmetric positive definite matrix via Cholesky.

    Raises :class:`NumericError` if the factorization fails or the
    condition number exceeds ``MAX_CONDITION``.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return a.copy()
    a = 0.5 * (a + a.T)
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} has non-finite entries")
    try:
        chol = linalg.cho_factor(a, lower=True)
    except linalg.LinAlgError:
        raise NumericError(f"{name} is singular or not positive definite") from None
    eig = np.linalg.eigvalsh(a)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_CONDITION:
        raise NumericError(f"{name} is ill-conditioned (condition number {eig[-1] / max(eig[0], 1e-300):.3g})")
    inv = linalg.cho_solve(chol, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def _stage_pieces(fit, model):
    """Per-observation scores and mean second-derivative blocks."""
    N = model.n_obs
    K = model.n_components
    q1 = model.n_stage1_params
    pairs = model.pairs
    M = len(pairs)
    A = model.linear_predictors(fit.B_hat)
    Y = model.Y
    w1 = model.component_weights
    w2 = model.pair_weights

    S1 = np.zeros((N, q1))
    H1 = np.zeros((q1, q1))
    for k in range(K):
        D = model.design(k)
        idx = model.coef_index(k)
        _, d1, d2 = probit_derivatives(A[:, k], Y[:, k])
        S1[:, idx] += (w1[k] * d1)[:, None] * D
        H1[np.ix_(idx, idx)] += (D.T * (-w1[k] * d2)) @ D / N

    S2 = np.zeros((N, M))
    H2 = np.zeros((M, M))
    C = np.zeros((M, q1))
    for m, (j, k) in enumerate(pairs):
        g, d2, d_aj, d_ak = pair_rho_derivatives(fit.Sigma_hat[j, k], A[:, j], A[:, k], Y[:, j], Y[:, k])
        S2[:, m] = w2[m] * g
        H2[m, m] = -w2[m] * d2.mean()
        C[m, model.coef_index(j)] += -w2[m] * (d_aj @ model.design(j)) / N
        C[m, model.coef_index(k)] += -w2[m] * (d_ak @ model.design(k)) / N
    return S1, S2, H1, H2, C


def per_obs_scores(fit, model):
    """Stage-1 and stage-2 scores of each observation at the fitted values.

    Returns ``(S1, S2)`` with shapes (N, q1) and (N, M). Shared-coefficient
    scores are summed over components within an observation.
    """
    S1, S2, *_ = _stage_pieces(fit, model)
    return S1, S2


def assemble_blocks(S1, S2, fit, model):
    """Build :class:`SandwichBlocks` from the scores and analytic Hessians."""
    S1 = np.asarray(S1, dtype=float)
    S2 = np.asarray(S2, dtype=float)
    N = model.n_obs
    if S1.shape[0] != N or S2.shape[0] != N:
        raise ValueError("score matrices must have one row per original observation")
    _, _, H1, H2, C = _stage_pieces(fit, model)
    V1 = sym_inverse(H1, "stage-1 information (V1^-1)")
    V2 = sym_inverse(H2, "stage-2 information (V2^-1)") if H2.size else H2
    V1_star = S1.T @ S1 / N
    V2_star = S2.T @ S2 / N
    R = S2.T @ S1 / N
    return SandwichBlocks(
        V1=V1,
        V1_star=0.5 * (V1_star + V1_star.T),
        V2=V2,
        V2_star=0.5 * (V2_star + V2_star.T),
        C_star=C,
        R=R,
        n_obs=N,
    )


def robust_cov(blocks):
    """Joint covariance of (theta1, theta2), already divided by N.

    ::

        VS1  = V1 V1* V1
        C12  = V1 R' V2 - VS1 C*' V2
        VS2  = V2 V2* V2 + V2 (C* VS1 C*' - R V1 C*' - C* V1 R') V2
    """
    V1, V1s, V2, V2s, C, R = (blocks.V1, blocks.V1_star, blocks.V2, blocks.V2_star, blocks.C_star, blocks.R)
    VS1 = V1 @ V1s @ V1
    cov12 = V1 @ R.T @ V2 - VS1 @ C.T @ V2
    VS2 = V2 @ V2s @ V2 + V2 @ (C @ VS1 @ C.T - R @ V1 @ C.T - C @ V1 @ R.T) @ V2
    full = np.block([[VS1, cov12], [cov12.T, VS2]]) / blocks.n_obs
    full = 0.5 * (full + full.T)
    if not np.all(np.isfinite(full)):
        raise NumericError("robust covariance has non-finite entries")
    if np.any(np.diag(full) < 0):
        raise NumericError("robust covariance has negative variances")
    return full
