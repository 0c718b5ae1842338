import numpy as np
import pytest
from sklearn.base import clone
from sklearn.datasets import make_blobs
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from wardnet import SimplexLinearNetwork


@pytest.fixture
def blobs():
    X, y = make_blobs(n_samples=60, centers=[[4, 0.5], [0.5, 4]], cluster_std=0.6, random_state=0)
    return np.abs(X), y


def test_fit_predict(blobs):
    X, y = blobs
    clf = SimplexLinearNetwork(hidden_layer_sizes=(3,), random_state=0, max_iter=2000).fit(X, y)
    assert clf.score(X, y) >= 0.9
    proba = clf.predict_proba(X)
    assert proba.shape == (60, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert proba.min() >= 0
    np.testing.assert_allclose(clf.coef_.sum(axis=0), 1.0, atol=1e-12)
    assert len(clf.weights_) == 2


def test_string_labels(blobs):
    X, y = blobs
    labels = np.array(["left", "right"])[y]
    clf = SimplexLinearNetwork(mode="marginal", max_iter=2000).fit(X, labels)
    assert set(clf.predict(X)) <= {"left", "right"}
    assert list(clf.classes_) == ["left", "right"]


def test_clone_and_params():
    clf = SimplexLinearNetwork(hidden_layer_sizes=(4,), beta=3.0)
    twin = clone(clf)
    assert twin.get_params()["beta"] == 3.0
    assert twin.get_params()["hidden_layer_sizes"] == (4,)


def test_cross_validation(blobs):
    X, y = blobs
    scores = cross_val_score(SimplexLinearNetwork(mode="marginal", max_iter=1000), X, y, cv=3)
    assert scores.mean() >= 0.9


def test_errors(blobs):
    X, y = blobs
    with pytest.raises(NotFittedError):
        SimplexLinearNetwork().predict(X)
    with pytest.raises(ValueError):
        SimplexLinearNetwork().fit(-X, y)
    with pytest.raises(ValueError):
        SimplexLinearNetwork(hidden_layer_sizes=(1,)).fit(X, y)
    with pytest.raises(ValueError):
        SimplexLinearNetwork().fit(X, np.zeros(len(X)))
    clf = SimplexLinearNetwork(mode="marginal", max_iter=100).fit(X, y)
    with pytest.raises(ValueError):
        clf.predict(np.ones((2, 3)))
