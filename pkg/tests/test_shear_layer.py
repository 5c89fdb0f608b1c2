import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prandtl_lab import shear_layer as sl
from prandtl_lab.errors import (JumpMismatch, OutsideSector, PathThroughSingularity,
                                SingularCoefficient, TruncationTooSmall)

ROOT = -np.exp(0.25j * np.pi)


def closed_form_X(z):
    """Decaying solution at the eigenvalue: exp(lam z^2 / 2) / (tau - z^2)^2."""
    A = ROOT - z * z
    g = np.exp(0.5 * sl.LAM * z * z)
    X = g / A**2
    dX = g * (sl.LAM * z / A**2 + 4 * z / A**3)
    return X, dX


def test_B_tends_to_constant_matrix():
    B = sl.assemble_B(ROOT, 1e6)
    assert np.max(np.abs(B - sl.B_INFINITY)) < 1e-5
    eig = np.sort_complex(np.linalg.eigvals(B))
    expect = np.sort_complex(np.array([1j, -1j]) * np.exp(0.25j * np.pi))
    assert np.max(np.abs(eig - expect)) < 1e-5


@given(tau=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       r=st.floats(0.2, 5), arg=st.floats(-np.pi, np.pi))
def test_B_trace_matches_first_order_form(tau, r, arg):
    z = r * np.exp(1j * arg)
    A = tau - z * z
    if abs(A) < 1e-3:
        return
    B = sl.assemble_B(tau, z)
    assert B[0, 0] == 0 and B[0, 1] == 1
    assert B[1, 1] == pytest.approx(6 / A - 1 / (z * z), rel=1e-12)


def test_B_singular_at_turning_point():
    with pytest.raises(SingularCoefficient):
        sl.assemble_B(1.0 + 0j, 1.0)


@settings(max_examples=40)
@given(s=st.floats(-4, 4).filter(lambda v: abs(v) > 1e-3))
def test_closed_form_solves_the_X_equation(s):
    z = complex(s)
    X, dX = closed_form_X(z)
    h = 1e-4
    Xp, dXp = closed_form_X(z + h)
    Xm, dXm = closed_form_X(z - h)
    d2_fd = (dXp - dXm) / (2 * h)
    d2 = sl.x_second_derivative(ROOT, z, X, dX)
    assert abs(d2 - d2_fd) < 1e-6 * max(1.0, abs(d2))


def test_defect_vanishes_at_closed_form_root():
    ref = abs(sl.connection_defect(ROOT + 0.1))
    assert abs(sl.connection_defect(ROOT)) < 1e-10 * ref


def test_solve_tau_matches_closed_form_and_collocation(profile, oracles):
    expect = complex(*oracles["tau_tilde"])
    assert abs(profile.tau_tilde - expect) < 1e-9
    assert profile.tau_tilde.imag < 0
    assert abs(profile.defect) < 1e-10
    colloc, _ = sl.collocation_tau(near=profile.tau_tilde)
    assert abs(colloc - profile.tau_tilde) < 1e-6
    assert profile.tau == pytest.approx(expect / np.sqrt(2), abs=1e-9)


def test_profile_connects_zero_to_one(profile):
    W = profile.W_tilde
    assert abs(W[0]) < 1e-10
    assert abs(W[-1] - 1) < 1e-10


def test_profile_X_matches_closed_form_up_to_scale(profile):
    s = np.real(profile.z_grid)
    X_exact, _ = closed_form_X(s.astype(complex))
    i = np.argmin(np.abs(s))
    c = profile.X_samples[i] / X_exact[i]
    sel = np.abs(s) < 5
    assert np.max(np.abs(profile.X_samples[sel] - c * X_exact[sel])) < 1e-8 * abs(c)


def test_jump_conditions(profile):
    out = sl.build_V_profiles(profile, -1.0)
    assert abs(out.jumps[0] + out.tau) < 1e-6
    assert abs(out.jumps[1]) < 1e-6
    assert abs(out.jumps[2] - 1.0) < 1e-6


def test_jump_mismatch_is_reported(profile):
    with pytest.raises(JumpMismatch):
        sl.build_V_profiles(profile, -1.0, jump_tol=1e-14)


def test_decay_along_sector_rays(profile):
    reports = sl.verify_sector_decay(profile, sector=(0.0, np.pi / 8), n_rays=2)
    for rep in reports:
        assert rep.alpha == pytest.approx(sl.ray_decay_rate(rep.theta), rel=0.05)
        assert rep.r_squared > 0.999


def test_sector_outside_decay_region_is_rejected(profile):
    with pytest.raises(OutsideSector):
        sl.verify_sector_decay(profile, sector=(np.pi / 2, 5 * np.pi / 8))


def test_truncation_and_singular_paths_are_rejected():
    with pytest.raises(TruncationTooSmall):
        sl.connection_defect(ROOT, truncation_Z=1.0)
    with pytest.raises(PathThroughSingularity):
        sl.connection_defect(4.0 + 0j)


def test_eigenvalue_independent_of_ray(profile):
    other = sl.profile_on_ray(profile, np.pi / 16)
    assert abs(other.tau_tilde - profile.tau_tilde) < 1e-9
