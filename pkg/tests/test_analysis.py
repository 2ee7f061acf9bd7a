import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qwork.analysis import (coarse_grain, exponential_tail_fit, fluctuation_checks,
                            smoothed_cdf_density)
from qwork.distribution import WorkDistribution
from qwork.errors import GridError, UnboundedSpectrumError
from qwork.fock import PhysicalParams, Truncation, choose_truncation
from qwork.linear import work_distribution_linear
from qwork.quadratic import work_distribution_quadratic

from conftest import ORACLE_TRUNC, is_tripartite, kink_location, tripartite_report


def _gauss(x, mu, s):
    return np.exp(-0.5 * ((x - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi))


@pytest.fixture(scope="module")
def tripartite_point():
    p = PhysicalParams.from_occupations(0.19, 9.0, 0.7)
    return work_distribution_linear(p, choose_truncation(p, require_convergent=False))


def test_single_atom_gaussian():
    d = WorkDistribution(np.zeros(1), np.ones(1))
    cg = coarse_grain(d, "gaussian", 0.5)
    np.testing.assert_allclose(cg.density, _gauss(cg.grid, 0.0, 0.5), atol=1e-14)
    assert cg.mass() == pytest.approx(1.0, abs=1e-9)
    assert cg.spacing == pytest.approx(0.5 / 8)


def test_two_atoms_match_mixture():
    d = WorkDistribution(np.array([-1.3, 2.1]), np.array([0.3, 0.7]))
    cg = coarse_grain(d, "gaussian", 0.4)
    ref = 0.3 * _gauss(cg.grid, -1.3, 0.4) + 0.7 * _gauss(cg.grid, 2.1, 0.4)
    assert np.max(np.abs(cg.density - ref)) <= 1e-12


def test_explicit_grid_and_errors():
    d = WorkDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    grid = np.linspace(-4, 5, 181)
    cg = coarse_grain(d, "gaussian", 0.5, grid=grid)
    np.testing.assert_array_equal(cg.grid, grid)
    with pytest.raises(GridError):
        coarse_grain(d, "gaussian", 0.5, grid=np.linspace(-4, 5, 20))
    with pytest.raises(GridError):
        coarse_grain(d, "gaussian", 0.5, grid=np.linspace(-1, 2, 200))
    with pytest.raises(GridError):
        coarse_grain(d, "gaussian", 0.5, grid=np.concatenate([np.linspace(-4, 0, 50), np.linspace(0.1, 5, 80)]))
    with pytest.raises(GridError):
        coarse_grain(d, "gaussian", 0.5, spacing=0.2)
    with pytest.raises(ValueError):
        coarse_grain(d, "box", 0.5)
    with pytest.raises(ValueError):
        coarse_grain(d, "gaussian", 0.0)


@given(st.lists(st.tuples(st.floats(-20, 20), st.floats(0.01, 1.0)), min_size=1, max_size=30),
       st.floats(0.2, 2.0))
@settings(max_examples=40, deadline=None)
def test_gaussian_moment_identities(atoms, width):
    w, p = np.array(atoms).T
    d = WorkDistribution.from_transitions(w, p / p.sum())
    cg = coarse_grain(d, "gaussian", width)
    assert cg.mass() == pytest.approx(1.0, abs=1e-6)
    assert cg.mean() == pytest.approx(d.mean(), abs=1e-6)
    assert cg.variance() == pytest.approx(d.variance() + width ** 2, abs=1e-6)


def test_lorentzian_normalized_and_reported():
    d = WorkDistribution(np.array([0.0, 3.0]), np.array([0.4, 0.6]))
    cl = coarse_grain(d, "lorentzian", 0.5)
    assert cl.mass() == pytest.approx(1.0, abs=1e-6)
    assert cl.metadata["lorentzian_cutoff_widths"] == 40.0
    assert cl.metadata["lorentzian_renormalization"] > 1.0
    assert np.all(cl.density >= 0)
    # continuous at the cutoff
    edge = np.argmax(cl.grid > 3.0 + 20.0)
    assert cl.density[edge] < 1e-6


def test_mass_tracks_deficit():
    p = PhysicalParams.from_occupations(0.2, 0.5, 0.4)
    d = work_distribution_linear(p, Truncation(8, 40, tail_tol=1e-2))
    cg = coarse_grain(d, "gaussian", 0.5)
    assert cg.deficit == d.deficit
    assert cg.mass() == pytest.approx(1 - d.deficit, abs=1e-6)


def test_cdf_single_atom():
    d = WorkDistribution(np.zeros(1), np.ones(1))
    sc = smoothed_cdf_density(d, 0.5)
    assert sc.mass() == pytest.approx(1.0, abs=1e-9)
    assert sc.metadata["clipped_mass"] == 0.0
    assert sc.grid[np.argmax(sc.density)] == pytest.approx(0.0, abs=0.5)


def test_cdf_comb_is_flat():
    d = WorkDistribution(np.arange(10.0), np.full(10, 0.1))
    sc = smoothed_cdf_density(d, 1.0)
    inside = (sc.grid > 1.0) & (sc.grid < 8.0)
    assert np.allclose(sc.density[inside], 0.1, atol=1e-9)
    assert sc.mass() == pytest.approx(1.0, abs=1e-9)


def test_cdf_window_validation():
    with pytest.raises(ValueError):
        smoothed_cdf_density(WorkDistribution(np.zeros(1), np.ones(1)), 0.0)


def test_tail_fit_exact_exponential():
    from qwork.analysis import CoarseGrainedDensity

    x = np.linspace(0, 30, 601)
    dens = CoarseGrainedDensity(x, 3.0 * np.exp(-0.37 * x), "gaussian", 0.5)
    fit = exponential_tail_fit(dens, (5, 25))
    assert abs(fit.slope + 0.37) <= 1e-10
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(GridError):
        exponential_tail_fit(CoarseGrainedDensity(x, np.zeros_like(x), "gaussian", 0.5), (5, 25))


def test_tripartite_structure(tripartite_point):
    report = tripartite_report(coarse_grain(tripartite_point, "gaussian", 0.5))
    assert is_tripartite(report)


def test_lorentzian_and_cdf_agree_qualitatively(tripartite_point):
    gauss = tripartite_report(coarse_grain(tripartite_point, "gaussian", 0.5))
    for other in (coarse_grain(tripartite_point, "lorentzian", 0.5), smoothed_cdf_density(tripartite_point, 0.5)):
        rep = tripartite_report(other)
        for side in ("right", "left"):
            assert np.sign(rep[side]["tail_slope"]) == np.sign(gauss[side]["tail_slope"])
            # kink: the middle falls faster than the tail
            assert abs(rep[side]["mid_slope"]) > abs(rep[side]["tail_slope"])


def test_cdf_kink_location_matches_gaussian(tripartite_point):
    g = kink_location(coarse_grain(tripartite_point, "gaussian", 0.5), (2.0, 18.0))
    c = kink_location(smoothed_cdf_density(tripartite_point, 0.5), (2.0, 18.0))
    assert abs(g - c) <= 1.0


@pytest.mark.xfail(strict=True, reason="heavy Lorentzian tails of the dominant central atom "
                                       "move the apparent kink by several widths")
def test_lorentzian_kink_location_within_one_width(tripartite_point):
    g = kink_location(coarse_grain(tripartite_point, "gaussian", 0.5), (2.0, 18.0))
    lo = kink_location(coarse_grain(tripartite_point, "lorentzian", 0.5), (2.0, 18.0))
    assert abs(g - lo) <= 0.5


def test_hot_point_exponential_tail():
    p = PhysicalParams.from_occupations(0.9, 19.0, 0.7)
    d = work_distribution_linear(p, choose_truncation(p, require_convergent=False))
    fit = exponential_tail_fit(coarse_grain(d, "gaussian", 0.5), (12.0, 30.0))
    assert fit.r_squared >= 0.95 and fit.slope < 0


@pytest.mark.parametrize("kind", ["linear", "quadratic"])
def test_checks_zero_coupling(kind):
    p = PhysicalParams.from_occupations(0.2, 0.5, 0.0, kind=kind)
    s = fluctuation_checks(p, oracle_trunc=ORACLE_TRUNC)
    assert s.w_irr == 0.0 and s.delta_f == 0.0
    assert s.jarzynski_residual == pytest.approx(0.0, abs=1e-15)
    assert s.crooks_residual_max == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("params", [PhysicalParams.from_occupations(0.1, 1.0, 0.3),
                                    PhysicalParams.from_occupations(0.05, 0.5, 0.3, displacement=0.4),
                                    PhysicalParams.from_occupations(0.1, 1.0, 0.4, kind="quadratic")])
def test_checks_small_points(params):
    s = fluctuation_checks(params, oracle_trunc=ORACLE_TRUNC)
    assert s.w_irr == pytest.approx(s.mean - s.delta_f, abs=1e-15)
    assert s.w_irr >= 0
    assert s.jarzynski_residual <= 10 * s.deficit + 1e-11
    assert s.crooks_residual_max <= 1e-6
    assert set(s.to_dict()) >= {"mean", "variance", "skewness", "delta_f", "w_irr",
                                "jarzynski_residual", "crooks_residual_max"}


def test_checks_linear_temperature_sweep():
    # no drive: irreversible work is -delta_f and shrinks toward low temperature
    w = []
    for beta in (1e-3, 3e-3, 1e-2):
        s = fluctuation_checks(PhysicalParams(omega_c=500.0, coupling=0.5, beta=beta))
        assert s.w_irr == pytest.approx(-s.delta_f, rel=1e-12)
        w.append(s.w_irr)
    assert w[0] > w[1] > w[2] > 0


def test_checks_quadratic_coupling_sweep():
    w = [fluctuation_checks(PhysicalParams(omega_c=1000.0, coupling=k, kind="quadratic", beta=1e-3)).w_irr
         for k in (0.1, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(w) > 0)


def test_checks_divergent():
    with pytest.raises(UnboundedSpectrumError):
        fluctuation_checks(PhysicalParams(omega_c=100.0, coupling=1.2, beta=1e-3))


def test_quadratic_coarse_grained_tail():
    p = PhysicalParams.from_occupations(0.19, 9.0, 0.7, kind="quadratic")
    d = work_distribution_quadratic(p, choose_truncation(p))
    cg = coarse_grain(d, "gaussian", 0.9)
    assert cg.mean() == pytest.approx(d.mean(), abs=1e-6)
    fit = exponential_tail_fit(cg, (15.0, 60.0))
    assert fit.slope < 0 and fit.r_squared > 0.95
