import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prandtl_lab import dispersion as ds
from prandtl_lab import ivp_evolution as ivp
from prandtl_lab.errors import CFLViolation, FitUnstable


def smooth_data(y, c=1.0):
    return c * y**2 * np.exp(-y) * (1 + 0.3j * np.sin(y))


@settings(max_examples=20, deadline=None)
@given(a=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       k=st.integers(-20, 20))
def test_step_is_linear(default_flow, a, b, k):
    y = np.linspace(0, 8, 401)
    w1 = smooth_data(y)
    w2 = y * np.exp(-0.5 * y) * np.cos(2 * y)
    dt = min(ivp.stable_dt(default_flow, k), 1e-2)
    step = lambda w: ivp.step(default_flow, ivp.ModeState(k, 0.0, w, y), dt).w_hat
    lhs = step(a * w1 + b * w2)
    rhs = a * step(w1) + b * step(w2)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * (1 + np.max(np.abs(lhs)))


def test_pure_diffusion_energy_identity(default_flow):
    y = np.linspace(0, 8, 801)
    traj = ivp.run_ivp(default_flow, 0, smooth_data(y), 0.5, y=y, dt=1e-3)
    E = traj.l2**2
    lhs = 0.5 * np.diff(E) / traj.dt + traj.dissipation
    assert np.max(np.abs(lhs)) < 1e-10 * E[0] / traj.dt
    assert np.all(np.diff(traj.l2) <= 0)


def test_cfl_violation(default_flow):
    y = np.linspace(0, 8, 101)
    dt = 3.0 / (64 * default_flow.sup_abs())
    with pytest.raises(CFLViolation):
        ivp.step(default_flow, ivp.ModeState(64, 0.0, smooth_data(y), y), dt)
    with pytest.raises(CFLViolation):
        ivp.run_ivp(default_flow, 64, smooth_data(y), 0.1, y=y, dt=dt)


def test_wall_value_must_vanish(default_flow):
    y = np.linspace(0, 8, 101)
    with pytest.raises(ValueError):
        ivp.run_ivp(default_flow, 1, np.ones_like(y), 0.1, y=y)


@pytest.mark.parametrize("k", [0, 1, 64])
def test_zero_data_stays_zero(default_flow, k):
    y = np.linspace(0, 8, 257)
    traj = ivp.run_ivp(default_flow, k, np.zeros_like(y), 0.2, y=y, dt=1e-3)
    assert np.max(traj.l2) == 0.0


@settings(max_examples=30)
@given(rate=st.floats(-5, 20), c=st.floats(1e-3, 1e3))
def test_growth_fit_recovers_exponential(rate, c):
    t = np.linspace(0, 1, 200)
    fit = ivp.measure_growth_rate(np.column_stack([t, c * np.exp(rate * t)]))
    assert fit.rate == pytest.approx(rate, abs=1e-9)
    assert float(fit) == fit.rate


def test_growth_fit_rejects_oscillation():
    t = np.linspace(0, 1, 200)
    with pytest.raises(FitUnstable):
        ivp.measure_growth_rate(np.column_stack([t, np.exp(0.1 * t) * (2 + np.sin(40 * t))]))
    with pytest.raises(FitUnstable):
        ivp.measure_growth_rate(np.column_stack([t[:2], [1.0, 2.0]]))


@pytest.fixture(scope="module")
def quasimode_run(wide_flow, profile):
    k = 64
    y, U, _ = ivp.quasimode_initial_data(wide_flow, profile, k)
    traj = ivp.run_ivp(wide_flow, k, U, 3 / np.sqrt(k), y=y)
    return k, y, U, traj


def test_growth_matches_shooting_eigenvalue(wide_flow, tau_physical, quasimode_run):
    k, _, _, traj = quasimode_run
    fit = ivp.measure_growth_rate(traj.norms_history)
    exact = ds.find_unstable_eigenvalue(wide_flow, 1.0 / k, ds.IVP, tau=tau_physical)
    # mode exp(i k (x + omega t)) grows at -k Im omega
    assert fit.rate == pytest.approx(-k * exact.omega.imag, rel=0.02)
    assert fit.rate == pytest.approx(abs(tau_physical.imag) * np.sqrt(k), rel=0.15)


def test_energy_inequality_on_quasimode_run(wide_flow, quasimode_run):
    rep = ivp.energy_monitor(wide_flow, quasimode_run[3])
    assert rep.pass_fraction >= 0.999
    assert rep.envelope_ok


def test_time_step_halving(wide_flow, quasimode_run):
    k, y, U, traj = quasimode_run
    half = ivp.run_ivp(wide_flow, k, U, 3 / np.sqrt(k), y=y, dt=traj.dt / 2)
    assert abs(half.l2[-1] / traj.l2[-1] - 1) < 0.01


def test_energy_monitor_flags_fabricated_growth(wide_flow, quasimode_run):
    traj = quasimode_run[3]
    jump = np.where(np.arange(len(traj.times)) > 10, 10.0, 1.0)
    fake = ivp.Trajectory(traj.k, traj.dt, traj.y, traj.times, traj.l2 * jump, traj.grad,
                          traj.dissipation, traj.final, traj.tail_fraction)
    rep = ivp.energy_monitor(wide_flow, fake)
    assert rep.violation_steps == [10]
    assert rep.worst_margin < 0


def test_csv_export(tmp_path, wide_flow, quasimode_run):
    path = ivp.export_csv(quasimode_run[3], tmp_path / "norms.csv", C_s=1.0)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,l2,h1_seminorm,envelope"
    assert len(lines) == len(quasimode_run[3].times) + 1
