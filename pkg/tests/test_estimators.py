import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from robust_gfi import ParameterError, RobustFilterIdentifier, TLSSEMRegressor
from robust_gfi.filters import build_filter, sem_filter
from robust_gfi.graph import PerturbationSpec, generate_er, perturb_links


@pytest.fixture
def data():
    r = np.random.default_rng(0)
    s = generate_er(8, 0.4, r)
    h = build_filter(s, [0.5, 0.8, -0.3]).matrix
    sb = perturb_links(s, PerturbationSpec.symmetric(0.1), r).entries
    x = r.standard_normal((100, 8))
    return s.entries, sb, h, x, x @ h.T


def test_params_and_clone(data):
    _, sb, *_ = data
    est = RobustFilterIdentifier(s_bar=sb, method="d", lambda_=0.1)
    params = est.get_params()
    assert params["method"] == "d" and params["lambda_"] == 0.1
    c = clone(est)
    assert c.get_params()["lambda_"] == 0.1 and c is not est
    est.set_params(beta=0.5)
    assert est.beta == 0.5


@pytest.mark.filterwarnings("ignore::sklearn.exceptions.ConvergenceWarning")
@pytest.mark.parametrize("method", ["fi", "iter", "d", "r"])
def test_fit_predict(method, data):
    _, sb, h, x, y = data
    est = RobustFilterIdentifier(s_bar=sb, method=method, max_outer_iters=10).fit(x, y)
    assert est.filter_.shape == (8, 8) and est.n_features_in_ == 8
    assert est.predict(x).shape == y.shape
    assert est.score(x, y) > 0.5


def test_exact_fit_without_perturbation(data):
    s, _, h, x, y = data
    est = RobustFilterIdentifier(s_bar=s, method="fi").fit(x, y)
    np.testing.assert_allclose(est.filter_, h, atol=1e-8)


def test_input_checks(data):
    _, sb, _, x, y = data
    with pytest.raises(NotFittedError):
        RobustFilterIdentifier(s_bar=sb).predict(x)
    with pytest.raises(ParameterError):
        RobustFilterIdentifier(s_bar=sb, method="bogus").fit(x, y)
    with pytest.raises(ParameterError):
        RobustFilterIdentifier().fit(x, y)
    with pytest.raises(ParameterError):
        RobustFilterIdentifier(s_bar=sb[:4, :4]).fit(x, y)
    with pytest.raises(ParameterError):
        RobustFilterIdentifier(s_bar=sb, method="fi").fit(x, y[:, :4])
    est = RobustFilterIdentifier(s_bar=sb, method="fi").fit(x, y)
    with pytest.raises(ParameterError):
        est.predict(x[:, :3])


def test_tls_sem_regressor():
    r = np.random.default_rng(1)
    s = generate_er(8, 0.4, r).entries
    s = 0.5 * s / np.abs(np.linalg.eigvalsh(s)).max()
    x = r.standard_normal((300, 8))
    y = x @ sem_filter(s).matrix.T
    est = TLSSEMRegressor(s_bar=s).fit(x, y)
    assert est.score(x, y) > 0.99
    assert clone(est).get_params()["alpha"] == 0.1
    with pytest.raises(ParameterError):
        TLSSEMRegressor().fit(x, y)
