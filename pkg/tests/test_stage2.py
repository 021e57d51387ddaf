import numpy as np
import pytest
from scipy import integrate, optimize

from mvprobit.options import SolverOptions
from mvprobit.stage2 import (
    assemble_correlation,
    fit_pair_rho,
    fit_pair_rho_index,
    moment_start,
    nearest_correlation,
    pair_cell_prob,
    pair_loglik_index,
    pair_rho_derivatives,
)


def _pair_data(seed, n=500, rho=0.5):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    bj, bk = rng.uniform(-0.8, 0.8, 2), rng.uniform(-0.8, 0.8, 2)
    z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=n)
    yj = (z[:, 0] <= X @ bj).astype(float)
    yk = (z[:, 1] <= X @ bk).astype(float)
    return X, yj, yk, bj, bk


def test_cell_probability_against_area_integral():
    # 30-digit mpmath area integral of the density over (-inf, 0.7] x (-0.2, inf)
    assert pair_cell_prob(1, 0, 0.7, -0.2, 0.4) == pytest.approx(0.3911336931778862792, rel=1e-14)
    r = 0.4
    dens = lambda y, x: np.exp(-(x * x - 2 * r * x * y + y * y) / (2 * (1 - r * r))) / (2 * np.pi * np.sqrt(1 - r * r))
    val, _ = integrate.dblquad(dens, -np.inf, 0.7, -0.2, np.inf)
    assert pair_cell_prob(1, 0, 0.7, -0.2, 0.4) == pytest.approx(val, abs=1e-8)


def test_cells_partition_probability():
    a_j, a_k, r = np.array([0.3, -1.2]), np.array([0.9, 0.1]), -0.6
    total = sum(pair_cell_prob(yj, yk, a_j, a_k, r) for yj in (0, 1) for yk in (0, 1))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)


@pytest.mark.parametrize("seed", range(20))
def test_rho_derivatives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n = 40
    a_j, a_k = rng.normal(size=n), rng.normal(size=n)
    y_j, y_k = rng.integers(0, 2, n), rng.integers(0, 2, n)
    rho, h = rng.uniform(-0.8, 0.8), 1e-5
    g, d2, d_aj, d_ak = pair_rho_derivatives(rho, a_j, a_k, y_j, y_k)

    def logp(r, aj=a_j, ak=a_k):
        return np.log(pair_cell_prob(y_j, y_k, aj, ak, r))

    fd = (logp(rho + h) - logp(rho - h)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)
    fd2 = (pair_rho_derivatives(rho + h, a_j, a_k, y_j, y_k)[0] - pair_rho_derivatives(rho - h, a_j, a_k, y_j, y_k)[0]) / (2 * h)
    assert np.linalg.norm(d2 - fd2) <= 1e-6 * np.linalg.norm(fd2)
    fdj = (pair_rho_derivatives(rho, a_j + h, a_k, y_j, y_k)[0] - pair_rho_derivatives(rho, a_j - h, a_k, y_j, y_k)[0]) / (2 * h)
    fdk = (pair_rho_derivatives(rho, a_j, a_k + h, y_j, y_k)[0] - pair_rho_derivatives(rho, a_j, a_k - h, y_j, y_k)[0]) / (2 * h)
    assert np.linalg.norm(d_aj - fdj) <= 1e-6 * np.linalg.norm(fdj)
    assert np.linalg.norm(d_ak - fdk) <= 1e-6 * np.linalg.norm(fdk)


@pytest.mark.parametrize("seed", range(5))
def test_brent_matches_grid_maximum(seed):
    X, yj, yk, bj, bk = _pair_data(seed)
    pf = fit_pair_rho(X, yj, yk, bj, bk)
    a_j, a_k = X @ bj, X @ bk
    ref = optimize.minimize_scalar(lambda r: -pair_loglik_index(r, a_j, a_k, yj, yk), bounds=(-0.999, 0.999),
                                   method="bounded", options={"xatol": 1e-10})
    assert pf.rho == pytest.approx(ref.x, abs=1e-6)
    grid = np.linspace(-0.99, 0.99, 397)
    assert pf.loglik >= max(pair_loglik_index(r, a_j, a_k, yj, yk) for r in grid) - 1e-9
    assert not pf.boundary_flag
    assert pf.n_evaluations < 60


def test_component_swap_and_label_flip():
    X, yj, yk, bj, bk = _pair_data(11)
    base = fit_pair_rho(X, yj, yk, bj, bk).rho
    assert fit_pair_rho(X, yk, yj, bk, bj).rho == pytest.approx(base, abs=1e-7)
    assert fit_pair_rho(X, 1 - yj, yk, -bj, bk).rho == pytest.approx(-base, abs=1e-7)


def test_identical_columns_hit_boundary():
    rng = np.random.default_rng(0)
    a = rng.normal(size=300)
    y = (rng.normal(size=300) <= a).astype(float)
    pf = fit_pair_rho_index(a, a, y, y)
    assert pf.boundary_flag
    assert pf.rho == pytest.approx(1 - SolverOptions().rho_eps, abs=1e-5)


def test_moment_start():
    assert moment_start(np.ones(10), np.r_[np.ones(5), np.zeros(5)]) == 0.0
    y = np.r_[np.ones(50), np.zeros(50)]
    assert moment_start(y, y) == 0.5
    assert moment_start(y, 1 - y) == -0.5


def test_assemble_and_repair():
    from mvprobit.stage2 import PairFit

    fits = [PairFit(0, 1, 0.9, 0.0, True, False), PairFit(0, 2, 0.9, 0.0, True, False), PairFit(1, 2, -0.9, 0.0, True, False)]
    S = assemble_correlation(3, fits)
    assert np.linalg.eigvalsh(S).min() < 0
    R = nearest_correlation(S)
    np.testing.assert_allclose(np.diag(R), 1.0)
    assert np.linalg.eigvalsh(R).min() >= -1e-10


def test_bad_shapes():
    X, yj, yk, bj, bk = _pair_data(1)
    with pytest.raises(ValueError):
        fit_pair_rho(X, yj[:-1], yk, bj, bk)
