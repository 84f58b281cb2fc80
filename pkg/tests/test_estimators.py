import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from adapp.kernels import ARDSquaredExponential
from adapp.lowrank import KnotSelector, pivoted_ichol, reconstruct


@pytest.fixture()
def cloud():
    rng = np.random.default_rng(0)
    return rng.uniform(size=(60, 2))


def test_fit_exposes_factor_attributes(cloud):
    selector = KnotSelector(ARDSquaredExponential([2.0, 2.0]), rel_tol=0.05)
    selector.fit(cloud)
    factor = pivoted_ichol(ARDSquaredExponential([2.0, 2.0]), cloud, rel_tol=0.05)
    assert selector.rank_ == factor.rank
    assert np.array_equal(selector.knot_indices_, factor.knot_indices)
    assert selector.kappa_s_ <= selector.abs_tol_
    assert selector.terminated_by_ == "tolerance_met"
    assert selector.n_features_in_ == 2


def test_transform_feature_inner_products(cloud):
    selector = KnotSelector(ARDSquaredExponential([2.0, 2.0]), rel_tol=0.05).fit(cloud)
    features = selector.transform(cloud)
    assert features.shape == (60, selector.rank_)
    approx = features @ features.T
    assert np.abs(approx - reconstruct(selector.factor_)).max() < 1e-10


def test_fit_transform_equals_fit_then_transform(cloud):
    a = KnotSelector(ARDSquaredExponential([1.0, 1.0]), rel_tol=0.1)
    b = KnotSelector(ARDSquaredExponential([1.0, 1.0]), rel_tol=0.1)
    assert np.array_equal(a.fit_transform(cloud), b.fit(cloud).transform(cloud))


def test_transform_before_fit_raises(cloud):
    selector = KnotSelector(ARDSquaredExponential([1.0, 1.0]))
    with pytest.raises(NotFittedError):
        selector.transform(cloud)


def test_get_params_and_clone(cloud):
    kernel = ARDSquaredExponential([1.0, 1.0])
    selector = KnotSelector(kernel, rel_tol=0.07, m_max=11)
    params = selector.get_params()
    assert params["rel_tol"] == 0.07 and params["m_max"] == 11
    assert params["kernel"] is kernel
    cloned = clone(selector)
    cloned.fit(cloud)
    assert cloned.rank_ <= 11


def test_composes_in_sklearn_pipeline(cloud):
    from sklearn.linear_model import Ridge

    rng = np.random.default_rng(1)
    y = np.sin(4 * cloud[:, 0]) + 0.05 * rng.standard_normal(60)
    pipeline = make_pipeline(
        KnotSelector(ARDSquaredExponential([2.0, 2.0]), rel_tol=1e-2),
        Ridge(alpha=1e-4),
    )
    pipeline.fit(cloud, y)
    assert np.corrcoef(pipeline.predict(cloud), y)[0, 1] > 0.9
