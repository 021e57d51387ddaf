"""Univariate and bivariate standard normal kernels.

All functions accept scalars or arrays and broadcast like numpy ufuncs.
The bivariate CDF follows Genz's refinement of the Drezner & Wesolowsky
Gauss-Legendre construction, which is accurate to roughly 1e-15 in double
precision.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

__all__ = [
    "PROB_FLOOR",
    "norm_pdf",
    "norm_cdf",
    "norm_logcdf",
    "norm_quantile",
    "bvn_cdf",
    "bvn_pdf",
    "safe_log",
]

#: Lower clamp applied to probabilities before taking logs.
PROB_FLOOR = 1e-300

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_TWO_PI = 2.0 * np.pi

# Full Gauss-Legendre rules for the three |rho| regimes (6, 12, 20 points).
_GL_RULES = {n: leggauss(n) for n in (6, 12, 20)}


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out[()] if out.ndim == 0 else out


def norm_cdf(x):
    """Standard normal distribution function, exact at +-inf."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def norm_logcdf(x):
    """``log(norm_cdf(x))`` without underflow in the lower tail."""
    out = special.log_ndtr(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def norm_quantile(p):
    """Inverse of :func:`norm_cdf`.

    Raises
    ------
    ValueError
        If any ``p`` lies outside the open interval (0, 1).
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("norm_quantile requires 0 < p < 1")
    out = special.ndtri(p)
    return out[()] if out.ndim == 0 else out


def safe_log(p):
    """Log of probabilities clamped below at :data:`PROB_FLOOR`."""
    return np.log(np.maximum(p, PROB_FLOOR))


def bvn_pdf(h, k, rho):
    """Standard bivariate normal density with correlation ``rho`` (|rho| < 1)."""
    h, k, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, k, rho)))
    one_m = (1.0 - rho) * (1.0 + rho)
    q = (h * h - 2.0 * rho * h * k + k * k) / one_m
    out = np.exp(-0.5 * q) / (_TWO_PI * np.sqrt(one_m))
    return out[()] if out.ndim == 0 else out


def _bvnu_small(h, k, r):
    """Upper orthant P(X > h, Y > k) for |r| < 0.925 and finite h, k."""
    out = np.empty_like(h)
    absr = np.abs(r)
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = np.arcsin(r)
    for npts, sel in ((6, absr < 0.3), (12, (absr >= 0.3) & (absr < 0.75)), (20, absr >= 0.75)):
        if not sel.any():
            continue
        x, w = _GL_RULES[npts]
        a = asr[sel][:, None]
        sn = np.sin(0.5 * a * (1.0 + x))
        terms = np.exp((sn * hk[sel][:, None] - hs[sel][:, None]) / (1.0 - sn * sn))
        out[sel] = (terms @ w) * asr[sel] / (2.0 * _TWO_PI) + special.ndtr(-h[sel]) * special.ndtr(-k[sel])
    return out


def _bvnu_large(h, k, r):
    """Upper orthant P(X > h, Y > k) for 0.925 <= |r| < 1 and finite h, k."""
    x, w = _GL_RULES[20]
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    a_s = (1.0 - r) * (1.0 + r)
    a = np.sqrt(a_s)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    bvn = a * np.exp(-0.5 * (bs / a_s + hk)) * (
        1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0
    )
    b = np.sqrt(bs)
    tail = np.where(
        hk > -160.0,
        np.exp(-0.5 * hk) * np.sqrt(_TWO_PI) * special.ndtr(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
        0.0,
    )
    bvn = bvn - tail
    half_a = (0.5 * a)[:, None]
    xs = (half_a * (x + 1.0)) ** 2
    rs = np.sqrt(1.0 - xs)
    bs_ = bs[:, None]
    hk_ = hk[:, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        integrand = np.exp(-bs_ / (2.0 * xs) - hk_ / (1.0 + rs)) / rs - np.exp(-0.5 * (bs_ / xs + hk_)) * (
            1.0 + c[:, None] * xs * (1.0 + d[:, None] * xs)
        )
    integrand = np.where(np.isfinite(integrand), integrand, 0.0)
    bvn = -(bvn + 0.5 * a * (integrand @ w)) / _TWO_PI
    pos_part = bvn + special.ndtr(-np.maximum(h, k))
    neg_part = -bvn + np.maximum(0.0, special.ndtr(-h) - special.ndtr(-k))
    return np.where(neg, neg_part, pos_part)


def bvn_cdf(h, k, rho):
    """P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation ``rho``.

    ``h`` and ``k`` may be infinite. ``|rho| = 1`` is treated as the
    degenerate limit. Inputs broadcast against each other.

    Raises
    ------
    ValueError
        If any ``rho`` is outside [-1, 1] or NaN.
    """
    h, k, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, k, rho)))
    if np.any(~((rho >= -1.0) & (rho <= 1.0))):
        raise ValueError("bvn_cdf requires -1 <= rho <= 1")
    shape = h.shape
    h, k, rho = h.ravel(), k.ravel(), rho.ravel()
    # canonical argument order makes the result exactly symmetric in (h, k)
    h, k = np.minimum(h, k), np.maximum(h, k)
    out = np.empty(h.shape, dtype=float)

    fin = np.isfinite(h) & np.isfinite(k)
    inf = ~fin
    if inf.any():
        hi, ki = h[inf], k[inf]
        val = np.where(hi == np.inf, special.ndtr(ki), np.where(ki == np.inf, special.ndtr(hi), 0.0))
        val = np.where((hi == -np.inf) | (ki == -np.inf), 0.0, val)
        out[inf] = val

    pos1 = fin & (rho == 1.0)
    neg1 = fin & (rho == -1.0)
    if pos1.any():
        out[pos1] = special.ndtr(np.minimum(h[pos1], k[pos1]))
    if neg1.any():
        out[neg1] = np.maximum(0.0, special.ndtr(h[neg1]) + special.ndtr(k[neg1]) - 1.0)

    interior = fin & (np.abs(rho) < 1.0)
    small = interior & (np.abs(rho) < 0.925)
    large = interior & ~small
    # lower orthant at (h, k) is the upper orthant at (-h, -k)
    if small.any():
        out[small] = _bvnu_small(-h[small], -k[small], rho[small])
    if large.any():
        out[large] = _bvnu_large(-h[large], -k[large], rho[large])

    out = np.clip(out, 0.0, 1.0).reshape(shape)
    return out[()] if out.ndim == 0 else out
