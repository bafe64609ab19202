import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from somids import FlowPreprocessor, MinMaxClampScaler, SelfOrganizingMap, SignificanceSelector, SOMClassifier
from somids.synthetic import make_two_gaussians


def test_get_params_and_clone():
    clf = SOMClassifier(n_rows=4, n_cols=6, steps=123, lr0=0.5, random_state=3)
    params = clf.get_params()
    assert params["n_rows"] == 4 and params["steps"] == 123 and params["random_state"] == 3
    twin = clone(clf)
    assert twin.get_params() == params
    assert not hasattr(twin, "labeled_map_")


def test_pipeline_fit_predict():
    data = make_two_gaussians(n_samples=300, seed=1)
    X = data.features * 40 - 7  # unscaled input
    pipe = make_pipeline(MinMaxClampScaler(), SOMClassifier(5, 5, steps=2000, random_state=0))
    pipe.fit(X, data.labels)
    assert pipe.score(X, data.labels) >= 0.95
    assert set(pipe.predict(X)) <= {0, 1}


def test_classifier_deterministic():
    data = make_two_gaussians(n_samples=200, seed=2)
    a = SOMClassifier(4, 4, steps=500, random_state=7).fit(data.features, data.labels)
    b = SOMClassifier(4, 4, steps=500, random_state=7).fit(data.features, data.labels)
    assert np.array_equal(a.som_.weights, b.som_.weights)


def test_self_organizing_map_transform_predict():
    X = np.random.default_rng(0).random((50, 3))
    som = SelfOrganizingMap(3, 3, steps=200, random_state=0).fit(X)
    D = som.transform(X)
    assert D.shape == (50, 9)
    assert np.array_equal(som.predict(X), np.argmin(D, axis=1))


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        SOMClassifier().predict(np.zeros((1, 2)))


def test_selector_in_pipeline():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.random(100), np.full(100, 0.5), rng.random(100) * 0.01])
    sel = SignificanceSelector(threshold=0.01).fit(X)
    assert sel.get_support().tolist() == [True, False, False]
    assert sel.transform(X).shape == (100, 1)


def test_preprocessor_params():
    assert FlowPreprocessor(threshold=0.2).get_params()["threshold"] == 0.2
