import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from prandtl_lab.errors import InfeasibleProfile
from prandtl_lab.shear_flow import (MAX_DERIV, ShearFlowParams, build_shear_flow,
                                    energy_constant, energy_constant_quadrature,
                                    validate_structure)

PRESETS = [ShearFlowParams(), ShearFlowParams.wide_cap(), ShearFlowParams.thin_cap()]

params = st.builds(
    lambda a, frac_m, frac_r, lift, gap, U: ShearFlowParams(
        far_field_U=U, crit_point_a=a, crit_value=a + lift, curvature=-1.0,
        linear_radius_m=frac_m * a, quad_radius=frac_r * (1 - frac_m) * a,
        support_M=a + frac_r * (1 - frac_m) * a + gap),
    a=st.floats(0.8, 3.0), frac_m=st.floats(0.05, 0.3), frac_r=st.floats(0.1, 0.7),
    lift=st.floats(0.2, 1.0), gap=st.floats(0.5, 4.0), U=st.floats(0.0, 1.0))


@pytest.mark.parametrize("p", PRESETS, ids=["default", "wide_cap", "thin_cap"])
def test_presets_satisfy_every_structural_check(p):
    report = validate_structure(build_shear_flow(p))
    assert report.ok, report.failed()


@settings(max_examples=25, deadline=None)
@given(p=params)
def test_construction_invariants_hold_for_any_buildable_profile(p):
    try:
        flow = build_shear_flow(p)
    except InfeasibleProfile:
        assume(False)
    checks = validate_structure(flow, n_samples=4001).checks
    for name in ("wall_value", "linear_near_wall", "critical_point", "curvature_negative",
                 "quadratic_cap", "far_field", "c4_continuity", "positivity"):
        assert checks[name][0], (name, checks[name])


@settings(max_examples=15, deadline=None)
@given(p=params)
def test_energy_constant_two_routes_agree(p):
    try:
        flow = build_shear_flow(p)
    except InfeasibleProfile:
        assume(False)
    assert energy_constant(flow) == pytest.approx(energy_constant_quadrature(flow), rel=1e-9)


@pytest.mark.parametrize("name,p", [("default", PRESETS[0]), ("wide_cap", PRESETS[1]),
                                    ("thin_cap", PRESETS[2])])
def test_energy_constant_matches_high_precision_oracle(oracles, name, p):
    assert energy_constant(build_shear_flow(p)) == pytest.approx(
        oracles["energy_constant"][name], rel=1e-11)


def test_flow_derivatives_match_finite_differences(wide_flow):
    # centred differences of order j converge at second order to order j + 1
    for j in range(4):
        errs = []
        for n in (4001, 8001):
            y = np.linspace(0.0, 2 * wide_flow.M, n)
            fd = np.gradient(wide_flow(y, j), y[1] - y[0])[5:-5]
            errs.append(np.max(np.abs(fd - wide_flow(y, j + 1)[5:-5])))
        assert errs[1] < errs[0] / 3.5


def test_critical_point_properties(wide_flow):
    assert wide_flow.u_a == pytest.approx(3.25)
    assert wide_flow(wide_flow.a, 1) == pytest.approx(0.0, abs=1e-13)
    assert wide_flow.curvature == -1.0
    assert wide_flow.sup_abs() == pytest.approx(3.25)


def test_infeasible_parameters_are_rejected():
    with pytest.raises(InfeasibleProfile):
        build_shear_flow(ShearFlowParams(linear_radius_m=0.9))
    with pytest.raises(InfeasibleProfile):
        build_shear_flow(ShearFlowParams(support_M=1.1))


def test_negative_y_and_high_orders_are_rejected(default_flow):
    with pytest.raises(ValueError):
        default_flow(-0.1)
    with pytest.raises(ValueError):
        default_flow(1.0, MAX_DERIV + 1)
