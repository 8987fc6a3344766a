import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from jjgrayzone import model
from jjgrayzone.estimator import GrayZoneEstimator


@pytest.fixture(scope="module")
def fitted():
    return GrayZoneEstimator(beta_c=1.0, q=500.0).fit(model.step(40.0))


def test_params_round_trip():
    est = GrayZoneEstimator(theta=0.3, method="quadrature")
    assert est.get_params()["theta"] == 0.3
    c = clone(est.set_params(q=250.0))
    assert c.q == 250.0 and not hasattr(c, "coeffs_")


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GrayZoneEstimator().predict_proba([0.0])


def test_predictions(fitted):
    w = fitted.delta_ix_over_ic_
    assert w == pytest.approx(0.0556358, rel=1e-5)
    proba = fitted.predict_proba([[-w], [0.0], [w]])
    assert proba.shape == (3, 2) and np.allclose(proba.sum(axis=1), 1.0)
    assert proba[1, 1] == 0.5
    assert fitted.predict([-w, w]).tolist() == [1, 0]
    assert fitted.transform([0.0]).shape == (1, 1)


def test_score(fitted):
    w = fitted.delta_ix_over_ic_
    x = np.array([-5 * w, -3 * w, 3 * w, 5 * w])
    assert fitted.score(x.reshape(-1, 1), [1, 1, 0, 0]) == 1.0
