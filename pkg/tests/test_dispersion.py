import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prandtl_lab import dispersion as ds
from prandtl_lab.errors import WrongBranch

EPS = [1e-2, 2.5e-3, 6.25e-4]


@pytest.mark.parametrize("eps", ["1e-2", "2.5e-3", "6.25e-4"])
def test_implicit_eigenvalue_matches_high_precision_root(wide_flow, tau_physical, oracles, eps):
    omega = ds.solve_omega_bvp(wide_flow, float(eps), tau_physical)
    expect = complex(*oracles["wide_cap_omega_bvp"][eps])
    assert abs(omega - expect) < 1e-12
    assert ds.omega_bvp_residual(wide_flow, float(eps), tau_physical, omega) < 1e-12


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-6, 5e-2))
def test_implicit_eigenvalue_residual_and_growth(wide_flow, tau_physical, eps):
    omega = ds.solve_omega_bvp(wide_flow, eps, tau_physical)
    assert ds.omega_bvp_residual(wide_flow, eps, tau_physical, omega) < 1e-12
    assert omega.imag > 0


def test_normalized_implicit_error_decreases(wide_flow, tau_physical):
    ua = wide_flow.u_a
    errs = [abs((ds.solve_omega_bvp(wide_flow, e, tau_physical) + 1 / ua) / np.sqrt(e)
                + tau_physical / ua**1.5) for e in EPS]
    assert errs[0] > errs[1] > errs[2]


def test_growth_constant(wide_flow, tau_physical):
    assert ds.growth_rate_sigma(wide_flow, tau_physical) == pytest.approx(0.5 / 3.25**1.5)
    with pytest.raises(ValueError):
        ds.growth_rate_sigma(wide_flow, 1 + 1j)


def test_far_field_rates_solve_the_characteristic_polynomial():
    e, w = 1e-3 * (1 - 1j), 0.3 + 0.01j
    for mu in ds.far_field_rates(e, w):
        assert abs(1j * e * mu**3 + w * mu) < 1e-10 * max(1, abs(mu) ** 3)


@pytest.fixture(scope="module")
def ivp_results(wide_flow, tau_physical):
    return [ds.find_unstable_eigenvalue(wide_flow, e, ds.IVP, tau=tau_physical) for e in EPS]


def test_ivp_dispersion_agreement(ivp_results):
    errs = [r.prediction_error for r in ivp_results]
    assert errs[0] > errs[1] > errs[2]
    assert max(r.defect_norm for r in ivp_results) < 1e-9
    assert all(r.omega.imag < 0 for r in ivp_results)


def test_bvp_shooting_close_to_implicit_root(wide_flow, tau_physical):
    eps = 1e-2
    r = ds.find_unstable_eigenvalue(wide_flow, eps, ds.BVP, tau=tau_physical)
    assert r.defect_norm < 1e-9
    assert r.omega.imag / eps == pytest.approx(r.sigma / np.sqrt(eps), rel=0.1)


def test_eigenfunction_satisfies_wall_conditions(wide_flow, ivp_results):
    r = ivp_results[0]
    y = np.linspace(0, 2 * wide_flow.M, 801)
    v, dv, _ = ds.eigenfunction(wide_flow, r, y)
    assert np.max(np.abs(v)) == pytest.approx(1.0)
    assert abs(v[0]) < 1e-8
    assert abs(dv[0]) < 1e-6 * np.max(np.abs(dv))


def test_eigenfunction_solves_the_spectral_equation(wide_flow, ivp_results):
    r = ivp_results[1]
    y = np.linspace(0, 2 * wide_flow.M, 4001)
    v, dv, d2v = ds.eigenfunction(wide_flow, r, y)
    d3v = np.gradient(d2v, y[1] - y[0], edge_order=2)
    res = (r.omega_tilde + wide_flow(y)) * dv - wide_flow(y, 1) * v + 1j * r.eps_tilde * d3v
    scale = np.max(np.abs(wide_flow(y, 1) * v))
    assert np.max(np.abs(res[2:-2])) < 1e-4 * scale


def test_unknown_variant_rejected(wide_flow):
    with pytest.raises((ValueError, KeyError)):
        ds.shoot_dispersion(wide_flow, 1e-2, -3.0 + 0.01j, variant="nope")


def test_wrong_branch_detected(wide_flow, tau_physical):
    # this start lies in the basin of a temporally decaying mode
    with pytest.raises(WrongBranch):
        ds.find_unstable_eigenvalue(wide_flow, 1e-2, ds.IVP, tau=tau_physical,
                                    guess=-3.0 + 0.02j)
