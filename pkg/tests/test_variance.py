import numpy as np
import pytest

from conftest import make_model
from mvprobit.estimator import fit
from mvprobit.exceptions import NumericError
from mvprobit.model import MvpModel
from mvprobit.numerics import norm_logcdf
from mvprobit.stage2 import pair_cell_prob
from mvprobit.variance import SandwichBlocks, robust_cov, sym_inverse


def _per_obs_logliks(model):
    """Per-observation stage-1 and stage-2 log-likelihoods as functions of theta."""
    q1 = model.n_stage1_params

    def l1(theta):
        A = model.linear_predictors(model.coef_matrix(theta[:q1]))
        return (model.component_weights * norm_logcdf((2 * model.Y - 1) * A)).sum(1)

    def l2(theta):
        A = model.linear_predictors(model.coef_matrix(theta[:q1]))
        out = np.zeros(model.n_obs)
        for m, (j, k) in enumerate(model.pairs):
            p = pair_cell_prob(model.Y[:, j], model.Y[:, k], A[:, j], A[:, k], theta[q1 + m])
            out += model.pair_weights[m] * np.log(p)
        return out

    return l1, l2


def _stacked_sandwich(model, theta, h=1e-5):
    """A^-1 B A^-T / N for the stacked estimating equations, all by finite differences."""
    q1 = model.n_stage1_params
    q = theta.size
    l1, l2 = _per_obs_logliks(model)

    def psi(t):
        cols = []
        for i in range(q):
            e = np.zeros(q)
            e[i] = h
            f = l1 if i < q1 else l2
            cols.append((f(t + e) - f(t - e)) / (2 * h))
        return np.column_stack(cols)

    N = model.n_obs
    Psi = psi(theta)
    Bm = Psi.T @ Psi / N
    A = np.empty((q, q))
    hh = 1e-4
    for i in range(q):
        e = np.zeros(q)
        e[i] = hh
        A[:, i] = -(psi(theta + e).mean(0) - psi(theta - e).mean(0)) / (2 * hh)
    Ainv = np.linalg.inv(A)
    return Ainv @ Bm @ Ainv.T / N


@pytest.mark.parametrize("weights", [False, True])
def test_two_stage_sandwich_equals_stacked_m_estimator(weights):
    base, _ = make_model(n=300, K=3, P=2, seed=4)
    kw = dict(component_weights=[1.0, 2.0, 0.5], pair_weights=[1.0, 0.5, 2.0]) if weights else {}
    model = MvpModel(Y=base.Y, X=base.X, **kw)
    res = fit(model)
    ref = _stacked_sandwich(model, res.params)
    np.testing.assert_allclose(res.robust_cov, ref, rtol=2e-4, atol=1e-9)


def test_shared_coefficient_sandwich():
    rng = np.random.default_rng(3)
    K, N = 3, 250
    designs = np.concatenate([np.ones((K, N, 1)), rng.standard_normal((K, N, 1))], axis=2)
    z = rng.multivariate_normal(np.zeros(K), 0.6 * np.eye(K) + 0.4, size=N)
    Y = (z <= np.einsum("knq,q->nk", designs, [-0.3, 0.5])).astype(float)
    model = MvpModel(Y=Y, designs=designs)
    res = fit(model)
    np.testing.assert_allclose(res.robust_cov, _stacked_sandwich(model, res.params), rtol=2e-4, atol=1e-9)


def test_covariance_is_symmetric_psd():
    model, _ = make_model(n=500, K=4, P=3, seed=9)
    cov = fit(model).robust_cov
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() > 0


def test_stage1_block_is_plain_sandwich():
    # without stage-2 parameters the formula reduces to H^-1 J H^-1 / N
    model, _ = make_model(n=300, K=2, P=2, seed=1)
    res = fit(model)
    b = res.blocks
    np.testing.assert_allclose(res.robust_cov[:4, :4], b.V1 @ b.V1_star @ b.V1 / 300, rtol=1e-12)


def test_row_permutation_invariance():
    model, _ = make_model(n=300, K=3, P=2, seed=2)
    perm = np.random.default_rng(0).permutation(300)
    a = fit(model).robust_cov
    b = fit(model.subset_rows(perm)).robust_cov
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-9)


def test_singular_information_raises():
    with pytest.raises(NumericError):
        sym_inverse(np.array([[1.0, 1.0], [1.0, 1.0]]))
    blocks = SandwichBlocks(
        V1=np.eye(1), V1_star=np.array([[np.nan]]), V2=np.eye(1), V2_star=np.eye(1),
        C_star=np.zeros((1, 1)), R=np.zeros((1, 1)), n_obs=10,
    )
    with pytest.raises(NumericError):
        robust_cov(blocks)
