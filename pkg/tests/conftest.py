import numpy as np
import pytest

from mvprobit.experiments import exchangeable
from mvprobit.model import MvpModel
from mvprobit.verification import SimSpec, simulate_y


def make_model(n=400, K=3, P=3, rho=0.4, seed=0, **kw):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, P - 1))])
    B = rng.uniform(-0.6, 0.6, size=(P, K))
    spec = SimSpec(B=B, Sigma=exchangeable(K, rho), X=X, seed=seed)
    Y = simulate_y(spec, rng=np.random.default_rng(seed + 1000))
    return MvpModel(Y=Y, X=X, **kw), spec


@pytest.fixture
def small_model():
    return make_model()[0]
