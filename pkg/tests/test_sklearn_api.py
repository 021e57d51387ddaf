import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import make_model
from mvprobit import MultivariateProbit
from mvprobit.estimator import fit


def test_get_set_params_and_clone():
    est = MultivariateProbit(gtol=1e-9, n_jobs=2)
    params = est.get_params()
    assert params["gtol"] == 1e-9 and params["n_jobs"] == 2
    c = clone(est).set_params(max_iter=20)
    assert c.max_iter == 20 and est.max_iter == 100


def test_fit_matches_functional_api():
    model, _ = make_model(n=400, K=3, P=3, seed=5)
    est = MultivariateProbit().fit(model.X[:, 1:], model.Y)
    res = fit(model)
    np.testing.assert_allclose(est.coef_, res.B_hat)
    np.testing.assert_allclose(est.corr_, res.Sigma_hat)
    np.testing.assert_allclose(est.stderr_, res.stderr)
    assert est.n_features_in_ == 2 and est.n_components_ == 3


def test_predict_shapes():
    model, _ = make_model(n=300, K=2, P=2, seed=6)
    est = MultivariateProbit().fit(model.X[:, 1:], model.Y)
    proba = est.predict_proba(model.X[:, 1:])
    assert proba.shape == (300, 2)
    assert np.all((proba > 0) & (proba < 1))
    np.testing.assert_array_equal(est.predict(model.X[:, 1:]), (proba >= 0.5).astype(int))
    assert np.isfinite(est.score(model.X[:, 1:], model.Y))


def test_not_fitted_and_feature_mismatch():
    est = MultivariateProbit()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((2, 2)))
    model, _ = make_model(n=200, K=2, P=3, seed=7)
    est.fit(model.X[:, 1:], model.Y)
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 5)))


def test_shared_design_through_3d_input():
    rng = np.random.default_rng(1)
    N, K = 300, 3
    Xs = rng.standard_normal((N, K, 1))
    Y = (rng.standard_normal((N, K)) <= -0.2 + 0.6 * Xs[..., 0]).astype(float)
    est = MultivariateProbit().fit(Xs, Y)
    assert est.shared_
    assert est.coef_.shape == (2, K)
    np.testing.assert_allclose(est.coef_[:, 0], est.coef_[:, 1])


def test_nan_rejected():
    X = np.ones((10, 1))
    X[3, 0] = np.nan
    with pytest.raises(ValueError):
        MultivariateProbit().fit(X, np.zeros((10, 2)))
