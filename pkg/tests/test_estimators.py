import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from knife.data import make_orange, make_sinusoid
from knife.estimators import KnifeClassifier, KnifeRegressor


@pytest.fixture(scope="module")
def regression():
    X, y = make_sinusoid(60, np.random.default_rng(0))
    return X, y


@pytest.fixture(scope="module")
def classification():
    X, y = make_orange(30, 2, np.random.default_rng(1))
    return X, np.where(y > 0, "outer", "inner")


class TestRegressor:
    def test_params_and_clone(self):
        est = KnifeRegressor(lambda2=0.3, restarts=2)
        params = est.get_params()
        assert params["lambda2"] == 0.3 and params["kernel"] == "gaussian"
        twin = clone(est)
        assert twin.get_params() == params
        est.set_params(lambda1=2.0)
        assert est.lambda1 == 2.0

    def test_fit_predict_transform(self, regression):
        X, y = regression
        est = KnifeRegressor(lambda2=2.0, restarts=1, gamma=0.2).fit(X, y)
        assert est.n_features_in_ == 10
        assert est.weights_.shape == (10,)
        assert np.all((est.weights_ >= 0) & (est.weights_ <= 1))
        pred = est.predict(X)
        assert pred.shape == (60,)
        assert est.score(X, y) > 0.5
        kept = est.get_support()
        np.testing.assert_array_equal(kept, est.weights_ > 0)
        assert est.transform(X).shape == (60, int(kept.sum()))

    def test_matches_model(self, regression):
        X, y = regression
        est = KnifeRegressor(lambda2=1.0, restarts=1).fit(X, y)
        np.testing.assert_array_equal(est.predict(X), est.model_.decision_function(X))
        assert est.objective_ == est.model_.objective

    def test_not_fitted(self, regression):
        with pytest.raises(NotFittedError):
            KnifeRegressor().predict(regression[0])

    def test_wrong_width(self, regression):
        X, y = regression
        est = KnifeRegressor(restarts=1, max_outer_iter=5).fit(X, y)
        with pytest.raises(ValueError, match="10"):
            est.predict(X[:, :4])


class TestClassifier:
    def test_string_labels(self, classification):
        X, y = classification
        est = KnifeClassifier(lambda2=0.5, restarts=1).fit(X, y)
        np.testing.assert_array_equal(est.classes_, ["inner", "outer"])
        pred = est.predict(X)
        assert set(pred) <= {"inner", "outer"}
        assert est.score(X, y) > 0.8
        f = est.decision_function(X)
        np.testing.assert_array_equal(pred == "outer", f >= 0)

    def test_needs_two_classes(self, classification):
        X, _ = classification
        with pytest.raises(ValueError, match="two classes"):
            KnifeClassifier().fit(X, np.zeros(X.shape[0]))

    def test_deterministic(self, classification):
        X, y = classification
        a = KnifeClassifier(restarts=2, random_state=3).fit(X, y)
        b = KnifeClassifier(restarts=2, random_state=3).fit(X, y)
        np.testing.assert_array_equal(a.weights_, b.weights_)
