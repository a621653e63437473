import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dbar_spectra import analytic, mesh
from dbar_spectra.estimators import DiscreteSpectrumEstimator, DiskBranchEstimator


def test_disk_branch_estimator_matches_ordered_spectrum():
    est = DiskBranchEstimator(count=4).fit(mesh.DomainSpec.disk(2.0))
    out = est.predict([0.5, 3.0])
    assert out.shape == (2, 4)
    np.testing.assert_array_equal(out[1], analytic.disk_ordered_spectrum(2.0, 3.0, 4).values)


def test_disk_branch_estimator_rejects():
    with pytest.raises(ValueError):
        DiskBranchEstimator().fit(mesh.DomainSpec.ellipse(1.0, 0.5))
    with pytest.raises(NotFittedError):
        DiskBranchEstimator().predict([1.0])
    est = DiskBranchEstimator().fit(mesh.DomainSpec.disk(1.0))
    with pytest.raises(ValueError):
        est.predict([-1.0])


def test_discrete_estimator_predict_and_transform():
    est = DiscreteSpectrumEstimator(h=0.25, count=3).fit(mesh.DomainSpec.disk(1.0))
    vals = est.predict(np.array([[1.0], [2.0]]))
    assert vals.shape == (2, 3)
    assert np.all(vals[1] > vals[0])
    slopes = est.transform([1.0])
    assert slopes.shape == (1, 3) and np.all(slopes > 0)


def test_discrete_estimator_params_and_clone():
    est = DiscreteSpectrumEstimator(h=0.2, kind="robin")
    p = est.get_params()
    assert p["h"] == 0.2 and p["kind"] == "robin"
    c = clone(est)
    assert c.get_params() == p and not hasattr(c, "forms_")
    with pytest.raises(ValueError):
        DiscreteSpectrumEstimator(kind="bogus").fit(mesh.DomainSpec.disk(1.0))
    with pytest.raises(ValueError):
        DiscreteSpectrumEstimator(h=0).fit(mesh.DomainSpec.disk(1.0))
