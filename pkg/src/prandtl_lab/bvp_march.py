"""x-marching of one time-Fourier mode of the linearised equation.

With u = e^{-i m t} u_m(x, y) the linearised equation becomes

    d/dx (L u_m) = i m u_m + u_m'',     L u = u_s u - u_s' int_0^y u,

so L u is the natural marching variable: it is regular at the wall even
though u_s(0) = 0.  The march is implicit in x (one backward Euler step
followed by BDF2) on a uniform grid with u(0) = 0 and a Neumann closure at
Y_max; the matrix L - c dx (D2 + i m) is factored once.

u is recovered from f = L u either by exact forward substitution of the
discrete L or by the explicit representation

    u = u_s' int_0^y f / u_s^2 + f / u_s,

whose singular part near the wall is rewritten with
int_0^y f / t^2 = int_0^y f' / t - f(y) / y on [0, m] where u_s(y) = y.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve

from ._numerics import derivative, fd_weights, line_fit
from .errors import GrowthOverflow, TraceViolation
from .shear_flow import ShearFlow

OVERFLOW = 1e12


def _prefix(u, y):
    return cumulative_trapezoid(u, y, initial=0.0)


def apply_L(flow: ShearFlow, u, y) -> np.ndarray:
    """u_s u - u_s' int_0^y u with the trapezoidal prefix integral."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u)
    return flow(y) * u - flow(y, 1) * _prefix(u, y)


def apply_Lprime(flow: ShearFlow, u, y) -> np.ndarray:
    """u' - (u_s'' / u_s) int_0^y u; the coefficient is exactly zero where u_s'' is."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u)
    d2 = flow(y, 2)
    us = flow(y)
    coef = np.zeros_like(us)
    nz = d2 != 0.0
    coef[nz] = d2[nz] / us[nz]
    du = derivative(u, y[1] - y[0], 1, accuracy=4)
    return du - coef * _prefix(u, y)


def _one_sided(order, n):
    return fd_weights(0.0, np.arange(n + 1), order)


def _check_trace(f, y, tol):
    """f(0) and f'(0), relative to max |f| and max |f'|, must be below ``tol``."""
    f = np.asarray(f)
    h = y[1] - y[0]
    scale = float(np.max(np.abs(f)))
    if scale == 0.0:
        return
    df = derivative(f, h, 1, accuracy=4)
    df0 = np.dot(_one_sided(1, 5) / h, f[:6])
    if abs(f[0]) > tol * scale:
        raise TraceViolation(f"|f(0)| = {abs(f[0]):.3e}: the representation integral diverges")
    if abs(df0) > tol * max(float(np.max(np.abs(df))), 1e-300):
        raise TraceViolation(f"|f'(0)| = {abs(df0):.3e}: the representation integral diverges")


def invert_L(flow: ShearFlow, f, y, method: str = "discrete", trace_tol: float = 1e-4) -> np.ndarray:
    """Solve L u = f for u with u(0) = 0.

    ``method="discrete"`` inverts the trapezoidal L of :func:`apply_L`
    exactly by forward substitution; ``method="representation"`` evaluates
    the explicit formula with Simpson quadrature, independent of how f
    was produced.  The trace test allows f'(0) up to ``trace_tol`` relative
    to max |f'|: the trapezoidal prefix integral leaves an O(h^2) slope at
    the wall even for admissible data.
    """
    y = np.asarray(y, dtype=float)
    f = np.asarray(f)
    _check_trace(f, y, trace_tol)
    if method == "discrete":
        return _invert_discrete(flow, f, y)
    if method == "representation":
        return _invert_representation(flow, f, y)
    raise ValueError(f"unknown method {method!r}")


def _invert_discrete(flow, f, y):
    us, dus = flow(y), flow(y, 1)
    h = np.diff(y)
    u = np.zeros(len(y), dtype=np.result_type(f, float))
    C = 0.0
    for j in range(1, len(y)):
        partial = C + 0.5 * h[j - 1] * u[j - 1]
        u[j] = (f[j] + dus[j] * partial) / (us[j] - 0.5 * h[j - 1] * dus[j])
        C = partial + 0.5 * h[j - 1] * u[j]
    return u


def _cumsimpson(g, x):
    g = np.asarray(g)
    if np.iscomplexobj(g):
        return (cumulative_simpson(g.real, x=x, initial=0.0)
                + 1j * cumulative_simpson(g.imag, x=x, initial=0.0))
    return cumulative_simpson(g, x=x, initial=0.0)


def _invert_representation(flow, f, y):
    m = flow.m
    h = y[1] - y[0]
    us, dus = flow(y), flow(y, 1)
    df = derivative(f, h, 1, accuracy=6)
    d2f0 = np.dot(_one_sided(2, 7) / h**2, f[:8])
    ratio = np.empty_like(df)
    ratio[1:] = df[1:] / y[1:]
    ratio[0] = d2f0  # f'(t)/t -> f''(0)
    near = _cumsimpson(ratio, y)  # int_0^y f'/t
    u = np.zeros_like(near)
    inner = y <= m + 1e-12
    u[inner] = near[inner]  # u_s = y: u = int_0^y f'/t
    jm = int(np.flatnonzero(inner)[-1])
    ym = y[jm]
    base = near[jm] - f[jm] / ym  # int_0^{y_m} f / t^2
    outer = ~inner
    if np.any(outer):
        g = f / np.where(us > 0, us, 1.0) ** 2
        tail = _cumsimpson(g[jm:], y[jm:])
        integral = base + tail
        u[jm:] = dus[jm:] * integral + f[jm:] / us[jm:]
    return u


# ---------------------------------------------------------------- marching

def _operators(flow, y, m):
    """Dense L and D2 + i m on the interior unknowns y_1..y_N."""
    n = len(y) - 1
    h = y[1] - y[0]
    us, dus = flow(y[1:]), flow(y[1:], 1)
    T = np.tril(np.full((n, n), h))
    T[np.arange(n), np.arange(n)] = 0.5 * h  # trapezoid prefix with u_0 = 0
    L = np.diag(us) - dus[:, None] * T
    G = np.zeros((n, n), complex)
    idx = np.arange(n)
    G[idx, idx] = -2.0 / h**2 + 1j * m
    G[idx[1:], idx[:-1]] = 1.0 / h**2
    G[idx[:-1], idx[1:]] = 1.0 / h**2
    G[n - 1, n - 2] = 2.0 / h**2  # Neumann ghost node
    return L, G


def sobolev_norm(f, y, k: int, lo: float | None = None, hi: float | None = None) -> float:
    """H^k norm on [lo, hi] with fourth-order finite differences."""
    y = np.asarray(y, dtype=float)
    h = y[1] - y[0]
    sel = np.ones(len(y), bool)
    if lo is not None:
        sel &= y >= lo - 1e-12
    if hi is not None:
        sel &= y <= hi + 1e-12
    total = 0.0
    for j in range(k + 1):
        d = f if j == 0 else derivative(f, h, j, accuracy=4)
        total += np.trapezoid(np.abs(d[sel]) ** 2, y[sel])
    return float(np.sqrt(total))


@dataclass
class BvpModeState:
    m: int
    x: float
    u_hat: np.ndarray
    Lu: np.ndarray
    y: np.ndarray
    norms_history: list = field(default_factory=list)


@dataclass
class BvpTrajectory:
    m: int
    dx: float
    y: np.ndarray
    xs: np.ndarray
    u_l2: np.ndarray
    u_h1: np.ndarray
    Lu_h2: np.ndarray
    u_sup: np.ndarray
    final: BvpModeState
    snapshots: list = field(default_factory=list, repr=False)  # (x, u) pairs when requested
    overflow: bool = False

    @property
    def norms_history(self) -> np.ndarray:
        return np.column_stack([self.xs, self.u_l2])


def march_bvp(flow: ShearFlow, m: int, boundary_data, X: float, dx: float, y=None,
              keep_snapshots: bool = False, raise_on_overflow: bool = True) -> BvpTrajectory:
    """March u_m from x = 0 to x = X.

    ``boundary_data`` holds u at x = 0 on ``y`` (uniform, default
    linspace(0, 2M, len(data))).  On overflow the partial trajectory is
    attached to the raised :class:`GrowthOverflow` as ``.trajectory``.
    """
    u0 = np.array(boundary_data, dtype=complex)
    if y is None:
        y = np.linspace(0.0, 2.0 * flow.M, len(u0))
    y = np.asarray(y, dtype=float)
    if abs(u0[0]) > 1e-12 * max(1.0, float(np.max(np.abs(u0)))):
        raise TraceViolation("boundary data must vanish at y = 0")
    if dx <= 0.0 or X < 0.0:
        raise ValueError("need dx > 0 and X >= 0")
    u0[0] = 0.0
    n_steps = int(np.ceil(X / dx - 1e-9)) if X > 0 else 0
    if n_steps:
        dx = X / n_steps
    L, G = _operators(flow, y, m)
    be = lu_factor(L - dx * G) if n_steps else None
    bdf = lu_factor(L - (2.0 / 3.0) * dx * G) if n_steps > 1 else None

    xs, l2s, h1s, h2s, sups, snaps = [], [], [], [], [], []

    def push(x, u):
        Lu = apply_L(flow, u, y)
        xs.append(x)
        l2s.append(float(np.sqrt(np.trapezoid(np.abs(u) ** 2, y))))
        h1s.append(sobolev_norm(u, y, 1))
        h2s.append(sobolev_norm(Lu, y, 2))
        sups.append(float(np.max(np.abs(u))))
        if keep_snapshots:
            snaps.append((x, u.copy()))
        return Lu

    Lu = push(0.0, u0)
    prev, cur = None, u0[1:]
    overflow = False
    for i in range(n_steps):
        if prev is None:
            nxt = lu_solve(be, L @ cur)
        else:
            nxt = lu_solve(bdf, L @ (4.0 / 3.0 * cur - 1.0 / 3.0 * prev))
        prev, cur = cur, nxt
        u = np.concatenate([[0.0], cur])
        Lu = push((i + 1) * dx, u)
        if h2s[-1] > OVERFLOW or not np.isfinite(h2s[-1]):
            overflow = True
            break
    u = np.concatenate([[0.0], cur])
    final = BvpModeState(m, xs[-1], u, Lu, y, list(zip(xs, h2s, h1s)))
    traj = BvpTrajectory(m, dx, y, np.array(xs), np.array(l2s), np.array(h1s), np.array(h2s),
                         np.array(sups), final, snaps, overflow)
    if overflow and raise_on_overflow:
        err = GrowthOverflow(f"|Lu|_H2 exceeded {OVERFLOW:g} at x = {xs[-1]:.4g}")
        err.trajectory = traj
        raise err
    return traj


def fit_x_growth(traj: BvpTrajectory, skip_fraction: float = 0.2) -> tuple[float, float]:
    """Least-squares slope of log|u|_L2 in x after a transient; returns (rate, r^2)."""
    sel = np.arange(len(traj.xs)) >= int(skip_fraction * len(traj.xs))
    x, v = traj.xs[sel], traj.u_l2[sel]
    if len(x) < 3 or np.any(v <= 0.0):
        return 0.0, 1.0
    fit = line_fit(x, np.log(v))
    return fit.slope, fit.r_squared


# ---------------------------------------------------------- energy bookkeeping

def energy_bookkeeping(flow: ShearFlow, traj: BvpTrajectory, ks=(0, 1, 2),
                       skip_fraction: float = 0.2) -> dict:
    """Compare 1/2 d/dx |d^k Lu|^2 with I_k1 + I_k2 at every station midpoint.

    I_k1 = Re(i m d^k u, d^k Lu) is the time-derivative term for the mode
    e^{-i m t} and I_k2 = Re(d^{k+2} u, d^k Lu).  The left side is a
    difference quotient of the stored snapshots; the right side is built
    from finite-difference derivatives of u.  Returns, per k, the largest
    discrepancy relative to max |1/2 d/dx |d^k Lu|^2|, taken over the
    stations after the start-up layer (the first ``skip_fraction``).
    """
    if len(traj.snapshots) < 2:
        raise ValueError("march with keep_snapshots=True")
    y = traj.y
    h = y[1] - y[0]
    interior = (y > 8 * h) & (y < y[-1] - 8 * h)  # away from one-sided closures
    out = {}
    for k in ks:
        lhs, rhs = [], []
        for (x0, u0), (x1, u1) in zip(traj.snapshots[:-1], traj.snapshots[1:]):
            f0, f1 = apply_L(flow, u0, y), apply_L(flow, u1, y)
            d = lambda g, j: g if j == 0 else derivative(g, h, j, accuracy=4)
            n0 = np.trapezoid(np.abs(d(f0, k)[interior]) ** 2, y[interior])
            n1 = np.trapezoid(np.abs(d(f1, k)[interior]) ** 2, y[interior])
            lhs.append(0.5 * (n1 - n0) / (x1 - x0))
            um, fm = 0.5 * (u0 + u1), 0.5 * (f0 + f1)
            Dk_f = d(fm, k)[interior]
            I1 = np.real(np.trapezoid(1j * traj.m * d(um, k)[interior] * np.conj(Dk_f), y[interior]))
            I2 = np.real(np.trapezoid(d(um, k + 2)[interior] * np.conj(Dk_f), y[interior]))
            rhs.append(I1 + I2)
        lhs, rhs = np.array(lhs), np.array(rhs)
        keep = np.arange(len(lhs)) >= int(skip_fraction * len(lhs))
        scale = max(float(np.max(np.abs(lhs[keep]))), 1e-300)
        gap = float(np.max(np.abs(lhs - rhs)[keep])) / scale
        out[k] = {"lhs": lhs, "rhs": rhs, "max_rel_gap": gap}
    return out


def estimate_constant(traj: BvpTrajectory, eps: float = 1.0, skip_fraction: float = 0.2) -> float:
    """Smallest C with |Lu(x)|^2 <= |Lu(0)|^2 + C int_0^x |Lu|^2 + eps int_0^x |u''|^2 along the march.

    For zero boundary data the |Lu(0)|^2 term vanishes and this is the
    discrete form of the a priori estimate; it returns 0 for a zero march.
    Stations inside the start-up layer (the first ``skip_fraction`` of x)
    are excluded, as there the integrals are O(dx) and the ratio measures
    the incompatibility of the data rather than the estimate.
    """
    x = traj.xs
    E = traj.Lu_h2 ** 2
    if len(x) < 2:
        return 0.0
    if not traj.snapshots:
        raise ValueError("march with keep_snapshots=True")
    h = traj.y[1] - traj.y[0]
    d2 = np.array([np.trapezoid(np.abs(derivative(u, h, 2, accuracy=4)) ** 2, traj.y)
                   for _, u in traj.snapshots])
    intE = cumulative_trapezoid(E, x, initial=0.0)
    intD = cumulative_trapezoid(d2, x, initial=0.0)
    num = E - E[0] - eps * intD
    with np.errstate(divide="ignore", invalid="ignore"):
        C = np.where(intE > 0, num / intE, 0.0)
    keep = x >= skip_fraction * x[-1]
    keep[0] = False
    return float(max(0.0, np.max(C[keep])))


# --------------------------------------------------------------- Hardy check

def _bump(y, lo, hi):
    out = np.zeros_like(y)
    inside = (y > lo) & (y < hi)
    s = (y[inside] - lo) / (hi - lo)
    out[inside] = np.exp(-1.0 / (s * (1.0 - s)) + 4.0)
    return out


def analytic_corpus(y, M: float) -> dict:
    return {
        "y^2 e^-y": y**2 * np.exp(-y),
        "y^3 e^-2y": y**3 * np.exp(-2 * y),
        "sin(y) bump": np.sin(y) * _bump(y, 0.0, M),
    }


def random_corpus(y, M: float, count: int, seed: int = 0) -> dict:
    """C^2 cubic splines on [0, M] with u(0) = 0, random knot values and zero end slope."""
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(count):
        knots = np.linspace(0.0, M, 9)
        vals = rng.normal(size=9)
        vals[0] = 0.0
        spline = CubicSpline(knots, vals, bc_type=((1, rng.normal()), (1, 0.0)))
        out[f"spline-{i}"] = spline(np.clip(y, 0.0, M))
    return out


@dataclass
class HardyReport:
    ratios_H1: dict
    ratios_H2_outer: dict
    C_H1: float              # sup of the H1 ratio over the linear span of the corpus
    C_H2_outer: float
    C_H1_individual: float   # max of the H1 ratio over the corpus functions themselves
    C_H2_outer_individual: float
    round_trip_max: float


def _sobolev_gram(fs, y, k, lo, hi):
    """Gram matrix of the H^k(lo, hi) inner product for the columns of ``fs``."""
    h = y[1] - y[0]
    sel = (y >= lo - 1e-12) & (y <= hi + 1e-12)
    w = np.zeros(np.count_nonzero(sel))
    dy = np.diff(y[sel])
    w[:-1] += 0.5 * dy
    w[1:] += 0.5 * dy
    G = np.zeros((fs.shape[1], fs.shape[1]), dtype=complex)
    for j in range(k + 1):
        d = fs if j == 0 else np.column_stack([derivative(c, h, j, accuracy=4) for c in fs.T])
        d = d[sel]
        G += d.conj().T @ (w[:, None] * d)
    return G


def _span_constant(A, B):
    """sqrt of the largest generalised eigenvalue of A v = lam B v."""
    # drop directions in which B is numerically singular (dependent corpus members)
    bvals, bvecs = np.linalg.eigh(B)
    keep = bvals > 1e-12 * bvals.max()
    P = bvecs[:, keep] / np.sqrt(bvals[keep])
    lam = np.linalg.eigvalsh(P.conj().T @ A @ P)
    return float(np.sqrt(max(lam.max(), 0.0)))


def hardy_lemma_check(flow: ShearFlow, corpus: dict, y) -> HardyReport:
    """Empirical constants in |u|_H1(0,M) <= C |Lu|_H2(0,M) and |u|_H2(m,M) <= C_m |Lu|_H2(0,M).

    Both inequalities are linear in u, so every combination of corpus
    members is a valid test function; the reported constants are the
    suprema over the span (a generalised Rayleigh quotient), and the
    per-function maxima are kept alongside.
    """
    y = np.asarray(y, dtype=float)
    M, m = flow.M, flow.m
    r1, r2 = {}, {}
    worst_trip = 0.0
    us, fs = [], []
    for name, u in corpus.items():
        f = apply_L(flow, u, y)
        back = invert_L(flow, f, y, method="discrete")
        scale = max(float(np.max(np.abs(u))), 1e-300)
        worst_trip = max(worst_trip, float(np.max(np.abs(back - u))) / scale)
        rhs = sobolev_norm(f, y, 2, 0.0, M)
        lhs1 = sobolev_norm(u, y, 1, 0.0, M)
        lhs2 = sobolev_norm(u, y, 2, m, M)
        if rhs == 0.0:
            r1[name] = r2[name] = 0.0 if lhs1 == 0.0 else np.inf
            continue
        r1[name] = lhs1 / rhs
        r2[name] = lhs2 / rhs
        us.append(u)
        fs.append(f)
    C1 = C2 = 0.0
    if us:
        U, F = np.column_stack(us), np.column_stack(fs)
        B = _sobolev_gram(F, y, 2, 0.0, M)
        C1 = _span_constant(_sobolev_gram(U, y, 1, 0.0, M), B)
        C2 = _span_constant(_sobolev_gram(U, y, 2, m, M), B)
    return HardyReport(r1, r2, C1, C2, max(r1.values(), default=0.0),
                       max(r2.values(), default=0.0), worst_trip)


def export_csv(traj: BvpTrajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u_h1", "Lu_h2"])
        for x, a, b in zip(traj.xs, traj.u_h1, traj.Lu_h2):
            w.writerow([f"{x:.16e}", f"{a:.16e}", f"{b:.16e}"])
    return path


def uniqueness_report_json(results: dict, path) -> Path:
    rows = [{"m": int(m), "sup_norm": float(v)} for m, v in sorted(results.items())]
    Path(path).write_text(json.dumps(rows, indent=2))
    return Path(path)
