import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qwork.estimators import CoarseGrainer, WorkStatistics
from qwork.linear import chi_linear


def test_params_roundtrip_and_clone():
    est = WorkStatistics(kind="quadratic", coupling=0.4, omega_c=3.0, beta=0.7)
    assert est.get_params()["coupling"] == 0.4
    other = clone(est).set_params(coupling=0.2)
    assert other.coupling == 0.2 and est.coupling == 0.4


def test_fit_populates_attributes():
    est = WorkStatistics(coupling=0.2, omega_c=2.4, beta=0.7).fit()
    assert est.distribution_.total == pytest.approx(1.0, abs=1e-11)
    assert est.summary_.w_irr >= 0
    assert est.truncation_.tail_tol == 1e-12


def test_transform_matches_chi():
    est = WorkStatistics(coupling=0.2, omega_c=2.4, beta=0.7)
    u = np.linspace(0, 5, 11)
    out = est.fit_transform(u)
    ref = chi_linear(u, est.params_, est.truncation_)
    np.testing.assert_array_equal(out, np.column_stack([ref.real, ref.imag]))


def test_divergent_summary_is_none():
    est = WorkStatistics(coupling=1.2, omega_c=100.0, beta=1e-3).fit()
    assert est.summary_ is None


def test_transform_before_fit():
    with pytest.raises(NotFittedError):
        WorkStatistics().transform([0.0])


def test_coarse_grainer():
    atoms = np.array([[0.0, 0.5], [2.0, 0.5]])
    cg = CoarseGrainer(width=0.4).fit(atoms)
    dens = cg.transform([0.0, 1.0, 2.0, 50.0]).ravel()
    peak = 0.5 / (0.4 * np.sqrt(2 * np.pi)) * (1 + np.exp(-12.5))
    assert dens[0] == pytest.approx(peak, rel=1e-6)
    assert dens[1] < dens[0] and dens[3] == 0.0
    with pytest.raises(ValueError):
        CoarseGrainer().fit(np.ones((3, 3)))
