"""Time stepping of one x-Fourier mode of the linearised equation.

For each wavenumber k the transform w(t, y) solves

    w_t + i k u_s w - i k u_s' int_0^y w - w_yy = 0,   w(0) = 0,

on [0, Y_max] with a homogeneous Neumann closure at Y_max.  One step is a
Strang splitting: a Crank-Nicolson half step for diffusion, a classical RK4
step for the transport and nonlocal terms, and a second diffusion half step.

Norms use trapezoidal weights and forward differences, the pair for which
the three-point Neumann Laplacian is symmetric, so the diffusion half steps
satisfy a discrete energy identity exactly.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import solve_banded

from ._numerics import line_fit
from .errors import CFLViolation, FitUnstable
from .shear_flow import ShearFlow, energy_constant

CFL_LIMIT = 2.0     # dt * |k| * sup|u_s| must not exceed this
CFL_DEFAULT = 0.25  # default fraction used when dt is not given
TRANSIENT_FRACTION = 0.2


def trapezoid_weights(y) -> np.ndarray:
    h = np.diff(y)
    w = np.zeros(len(y))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def l2_norm(w, y) -> float:
    return float(np.sqrt(np.dot(trapezoid_weights(y), np.abs(w) ** 2)))


def grad_norm(w, y) -> float:
    return float(np.sqrt(np.sum(np.abs(np.diff(w)) ** 2 / np.diff(y))))


def cumulative_integral(w, y) -> np.ndarray:
    return cumulative_trapezoid(w, y, initial=0.0)


@dataclass
class ModeState:
    k: int
    t: float
    w_hat: np.ndarray
    y: np.ndarray
    cumulative_integral: np.ndarray | None = None
    norms_history: list = field(default_factory=list)

    def __post_init__(self):
        self.w_hat = np.asarray(self.w_hat, dtype=complex)
        if self.cumulative_integral is None:
            self.cumulative_integral = cumulative_integral(self.w_hat, self.y)


class _Diffusion:
    """Crank-Nicolson half steps (I - s D2) w+ = (I + s D2) w on the interior nodes."""

    def __init__(self, y, dt):
        h = y[1] - y[0]
        if not np.allclose(np.diff(y), h, rtol=1e-9, atol=0.0):
            raise ValueError("the diffusion step needs a uniform grid")
        n = len(y) - 1  # unknowns y_1..y_N
        s = 0.25 * dt / h**2
        self.n, self.s = n, s
        ab = np.zeros((3, n), complex)
        ab[0, 1:] = -s
        ab[1, :] = 1.0 + 2.0 * s
        ab[2, :-1] = -s
        ab[2, -2] = -2.0 * s  # Neumann ghost: w_{N+1} = w_{N-1}
        self.ab = ab

    def explicit(self, v):
        s = self.s
        out = (1.0 - 2.0 * s) * v
        out[1:] += s * v[:-1]
        out[:-1] += s * v[1:]
        out[-1] += s * v[-2]
        return out

    def __call__(self, w):
        out = np.zeros_like(w)
        out[1:] = solve_banded((1, 1), self.ab, self.explicit(w[1:]))
        return out


def _transport_rhs(k, us, dus, y, w):
    return -1j * k * us * w + 1j * k * dus * cumulative_integral(w, y)


def stable_dt(flow: ShearFlow, k: int, fraction: float = CFL_DEFAULT) -> float:
    speed = abs(k) * flow.sup_abs()
    return np.inf if speed == 0 else fraction / speed


def _check_cfl(flow, k, dt):
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    budget = CFL_LIMIT / (abs(k) * flow.sup_abs()) if k != 0 else np.inf
    if dt > budget:
        raise CFLViolation(f"dt={dt:.3e} exceeds the transport budget {budget:.3e}")


def _advance(flow, state, dt, diff, coeffs):
    """One Strang step; returns (new samples, diffusive dissipation of the step)."""
    k, y = state.k, state.y
    us, dus = coeffs
    w0 = state.w_hat
    w1 = diff(w0)
    dissipation = 0.5 * grad_norm(0.5 * (w0 + w1), y) ** 2
    if k != 0:
        f = lambda v: _transport_rhs(k, us, dus, y, v)
        k1 = f(w1)
        k2 = f(w1 + 0.5 * dt * k1)
        k3 = f(w1 + 0.5 * dt * k2)
        k4 = f(w1 + dt * k3)
        w2 = w1 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        w2[0] = 0.0
    else:
        w2 = w1
    w3 = diff(w2)
    dissipation += 0.5 * grad_norm(0.5 * (w2 + w3), y) ** 2
    return w3, dissipation


def step(flow: ShearFlow, state: ModeState, dt: float) -> ModeState:
    """Advance one step of size dt; the history of the input state is not copied."""
    _check_cfl(flow, state.k, dt)
    diff = _Diffusion(state.y, dt)
    coeffs = (flow(state.y), flow(state.y, 1))
    w, _ = _advance(flow, state, dt, diff, coeffs)
    return ModeState(state.k, state.t + dt, w, state.y)


@dataclass
class Trajectory:
    k: int
    dt: float
    y: np.ndarray
    times: np.ndarray
    l2: np.ndarray
    grad: np.ndarray
    dissipation: np.ndarray  # per step, time-averaged |w_y|^2 of the diffusion stages
    final: ModeState
    tail_fraction: np.ndarray = field(default=None, repr=False)

    @property
    def norms_history(self) -> np.ndarray:
        return np.column_stack([self.times, self.l2])


def run_ivp(flow: ShearFlow, k: int, initial_profile, T: float, y=None, dt: float | None = None,
            tail_from: float | None = None) -> Trajectory:
    """Evolve from ``initial_profile`` (samples on ``y``) up to time T."""
    if y is None:
        y = np.linspace(0.0, 2.0 * flow.M, len(initial_profile))
    y = np.asarray(y, dtype=float)
    w = np.array(initial_profile, dtype=complex)
    if abs(w[0]) > 1e-12 * max(1.0, np.max(np.abs(w))):
        raise ValueError("initial profile must vanish at y = 0")
    w[0] = 0.0
    if T < 0.0:
        raise ValueError("T must be non-negative")
    if dt is None:
        dt = min(stable_dt(flow, k), T / 10.0 if T > 0 else 1.0, 1e-2)
    _check_cfl(flow, k, dt)
    n_steps = int(np.ceil(T / dt - 1e-9)) if T > 0 else 0
    if n_steps:
        dt = T / n_steps
    diff = _Diffusion(y, dt)
    coeffs = (flow(y), flow(y, 1))
    tail = y >= (flow.M if tail_from is None else tail_from)

    state = ModeState(k, 0.0, w, y)
    times = [0.0]
    l2 = [l2_norm(w, y)]
    gr = [grad_norm(w, y)]
    tails = [l2_norm(w * tail, y) / l2[0] if l2[0] > 0 else 0.0]
    diss = []
    for i in range(n_steps):
        w, d = _advance(flow, state, dt, diff, coeffs)
        state = ModeState(k, (i + 1) * dt, w, y, cumulative_integral=np.empty(0))
        times.append(state.t)
        l2.append(l2_norm(w, y))
        gr.append(grad_norm(w, y))
        tails.append(l2_norm(w * tail, y) / l2[-1] if l2[-1] > 0 else 0.0)
        diss.append(d)
    state.cumulative_integral = cumulative_integral(state.w_hat, y)
    state.norms_history = list(zip(times, l2, gr))
    return Trajectory(k, dt, y, np.array(times), np.array(l2), np.array(gr),
                      np.array(diss), state, np.array(tails))


@dataclass
class EnergyReport:
    constant: float
    n_steps: int
    n_violations: int
    violation_steps: list
    worst_margin: float      # min over steps of (rhs + slack - lhs) / (rhs + slack)
    envelope_ok: bool
    envelope_worst_ratio: float

    @property
    def pass_fraction(self) -> float:
        return 1.0 if self.n_steps == 0 else 1.0 - self.n_violations / self.n_steps


def energy_monitor(flow: ShearFlow, traj: Trajectory, C_s: float | None = None) -> EnergyReport:
    """Per-step check of 1/2 d|w|^2/dt + |w_y|^2 <= C_s |k| |w|^2 and of the Gronwall envelope.

    The right side is taken at the start of each step.  The slack allowed for
    time discretisation is the second-order remainder of the one-step Gronwall
    factor, (exp(2 g dt) - 1 - 2 g dt) / (2 dt) |w^n|^2 with g = C_s |k|, which
    is O(dt) and keeps the check equivalent to |w^{n+1}| <= exp(g dt) |w^n|
    when the dissipation is dropped.
    """
    C = energy_constant(flow) if C_s is None else C_s
    k, dt = abs(traj.k), traj.dt
    E = traj.l2 ** 2
    lhs = 0.5 * np.diff(E) / dt + traj.dissipation
    g = C * k
    rhs = g * E[:-1]
    slack = np.expm1(2.0 * g * dt) - 2.0 * g * dt
    slack = slack / (2.0 * dt) * E[:-1]
    bound = rhs + slack
    ok = lhs <= bound + 1e-13 * np.maximum(E[:-1], 1e-300) / dt
    viol = [int(i) for i in np.flatnonzero(~ok)]
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(bound > 0, (bound - lhs) / bound, np.where(lhs <= 1e-13, 1.0, -np.inf))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        env = np.exp(C * k * traj.times) * traj.l2[0]
        ratio = np.where(env > 0, traj.l2 / env, 0.0)
    env_ok = bool(np.all(traj.l2 <= env * (1.0 + 1e-10) + 1e-300))
    return EnergyReport(C, len(lhs), len(viol), viol,
                        float(margin.min()) if len(margin) else 1.0,
                        env_ok, float(ratio.max()) if len(ratio) else 0.0)


@dataclass(frozen=True)
class GrowthFit:
    rate: float
    residual: float
    t_start: float
    t_end: float

    def __float__(self):
        return self.rate


def measure_growth_rate(norms_history, window=None) -> GrowthFit:
    """Least-squares slope of log|w| against t.

    ``norms_history`` is an (n, 2) array of (t, norm).  ``window`` is a
    (t_start, t_end) pair; by default the first 20% of the samples are
    dropped.  The reported residual is the rms misfit of log|w| divided by
    the window length, so it has the units of a rate.
    """
    data = np.asarray(norms_history, dtype=float)
    t, nrm = data[:, 0], data[:, 1]
    if window is None:
        sel = np.arange(len(t)) >= int(TRANSIENT_FRACTION * len(t))
    else:
        sel = (t >= window[0]) & (t <= window[1])
    t, nrm = t[sel], nrm[sel]
    if len(t) < 3 or np.any(nrm <= 0.0):
        raise FitUnstable("need at least three positive samples in the window")
    fit = line_fit(t, np.log(nrm))
    span = t[-1] - t[0]
    residual = fit.residual_rms / span
    if residual > 0.1 * abs(fit.slope) and residual > 1e-12:
        raise FitUnstable(f"fit residual {residual:.3e} exceeds 10% of the rate {fit.slope:.3e}")
    return GrowthFit(fit.slope, residual, float(t[0]), float(t[-1]))


def quasimode_initial_data(flow: ShearFlow, profile, k: int, n: int = 2, n_points: int = 4096):
    """U profile of the order-n time quasimode at eps = 1/k and its grid."""
    from .quasimode import assemble_quasimode
    mode = assemble_quasimode(flow, profile, 1.0 / k, n, variant="IVP", n_points=n_points)
    return mode.y_grid, mode.U_profile, mode


def export_csv(traj: Trajectory, path, C_s: float | None = None) -> Path:
    path = Path(path)
    C = C_s if C_s is not None else 0.0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "l2", "h1_seminorm", "envelope"])
        for t, a, b in zip(traj.times, traj.l2, traj.grad):
            env = np.exp(C * abs(traj.k) * t) * traj.l2[0] if C_s is not None else np.nan
            w.writerow([f"{t:.16e}", f"{a:.16e}", f"{b:.16e}", f"{env:.16e}"])
    return path


def growth_summary_json(fits: dict, path) -> Path:
    rows = [{"k": int(k), "rate": f.rate, "residual": f.residual,
             "t_start": f.t_start, "t_end": f.t_end} for k, f in sorted(fits.items())]
    Path(path).write_text(json.dumps(rows, indent=2))
    return Path(path)
