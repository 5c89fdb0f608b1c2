"""Rescaled shear-layer connection problem.

In rescaled variables the layer profile W solves

    (tau - z^2)^2 W' + i ((tau - z^2) W)''' = 0,   W(-inf) = 0,  W(+inf) = 1.

Because the coefficient is quadratic, X = W' obeys a second-order equation
that does not involve W:

    X'' = 6 z X' / A + (i A + 6 / A) X,     A = tau - z^2.

Both ends are irregular singular points; the solution that decays at
+/- infinity behaves like z^q exp(lam z^2 / 2) with lam = i e^{i pi/4} (the
recessive root of lam^2 = -i along the real axis).  A value of tau for which
the two recessive solutions coincide gives the layer profile after one
integration and a normalisation.

All integration happens along the line z = e^{i theta} s, s real.
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from ._numerics import complex_newton, fd_weights, line_fit
from .errors import (FitFailed, JumpMismatch, NoRootInRegion, OutsideSector,
                     PathThroughSingularity, SingularCoefficient,
                     TruncationTooSmall)

LAM = np.exp(0.75j * np.pi)
B_INFINITY = np.array([[0.0, 1.0], [-1j, 0.0]])
SECTOR_RIGHT = (-np.pi / 8, 3 * np.pi / 8)
SECTOR_LEFT = (7 * np.pi / 8, 11 * np.pi / 8)
DEFAULT_SCAN = ((-3.0, 3.0), (-3.0, -0.05))
TRUNCATION_TOL = 1e-12


def assemble_B(tau_tilde: complex, z_tilde: complex) -> np.ndarray:
    """Coefficient matrix of the first-order form d/dt (X, X'/z) = B (X, X'/z), t = z^2/2."""
    A = tau_tilde - z_tilde * z_tilde
    if z_tilde == 0 or A == 0:
        raise SingularCoefficient(f"B is singular at z={z_tilde} for tau={tau_tilde}")
    z2 = z_tilde * z_tilde
    return np.array([[0.0, 1.0],
                     [(6.0 + 1j * A * A) / (z2 * A), 6.0 / A - 1.0 / z2]], dtype=complex)


def regularized_rhs(tau_tilde: complex, z_tilde: complex, state) -> np.ndarray:
    """d/dz of (X, X'/z), i.e. z B(z) applied to the state."""
    return z_tilde * (assemble_B(tau_tilde, z_tilde) @ np.asarray(state, dtype=complex))


def recessive_power(tau_tilde: complex) -> complex:
    """Exponent q in X ~ z^q exp(lam z^2/2)."""
    return (1j * tau_tilde - 7.0 * LAM) / (2.0 * LAM)


def ray_decay_rate(theta: float) -> float:
    """Gaussian rate alpha with |exp(lam z^2/2)| = exp(-alpha |z|^2) on arg z = theta."""
    return float(-np.real(LAM * np.exp(2j * theta)) / 2.0)


def x_second_derivative(tau_tilde, z, X, dX):
    A = tau_tilde - z * z
    return 6.0 * z * dX / A + (1j * A + 6.0 / A) * X


def x_third_derivative(tau_tilde, z, X, dX):
    A = tau_tilde - z * z
    d2X = x_second_derivative(tau_tilde, z, X, dX)
    return ((6.0 / A + 12.0 * z * z / A**2) * dX + 6.0 * z / A * d2X
            + (-2j * z + 12.0 * z / A**2) * X + (1j * A + 6.0 / A) * dX)


def _rhs(s, y, tau, e):
    z = e * s
    A = tau - z * z
    X, dX = y[0], y[1]
    d2X = 6.0 * z * dX / A + (1j * A + 6.0 / A) * X
    if len(y) == 2:
        return [e * dX, e * d2X]
    return [e * dX, e * d2X, e * X]


def _check_line(tau_tilde, theta, Z):
    zt = np.sqrt(complex(tau_tilde))
    e = np.exp(1j * theta)
    # distance from the turning points +/- zt to the segment e^{i theta}[-Z, Z]
    s = np.clip(np.real(zt / e), -Z, Z)
    if abs(zt - e * s) < 1e-6 * max(1.0, abs(zt)):
        raise PathThroughSingularity(
            f"tau - z^2 vanishes at z={zt:.6g} on the line arg z = {theta:.4g}")
    alpha = ray_decay_rate(theta)
    if alpha <= 0.0 or np.exp(-2.0 * alpha * Z * Z) > TRUNCATION_TOL:
        raise TruncationTooSmall(
            f"recessive/dominant ratio exp(-2 alpha Z^2) at Z={Z} exceeds {TRUNCATION_TOL:g}")


def _seed(tau_tilde, z0):
    q = recessive_power(tau_tilde)
    X0 = np.exp(q * np.log(z0) + 0.5 * LAM * z0 * z0)
    dX0 = X0 * (LAM * z0 + q / z0)
    return X0, dX0


def _shoot(tau_tilde, theta, Z, side, rtol, with_integral=False, s_eval=None, dense=False):
    e = np.exp(1j * theta)
    s0 = side * Z
    z0 = e * s0
    X0, dX0 = _seed(tau_tilde, z0)
    y0 = [X0, dX0]
    if with_integral:
        # tail of the integral of X beyond the truncation point
        y0.append(X0 / (LAM * z0))
    return solve_ivp(_rhs, (s0, 0.0), np.array(y0, dtype=complex), method="DOP853",
                     rtol=rtol, atol=1e-300, args=(complex(tau_tilde), e),
                     t_eval=s_eval, dense_output=dense)


def connection_defect(tau_tilde: complex, theta: float = 0.0, truncation_Z: float = 8.0,
                      rtol: float = 1e-12) -> complex:
    """Wronskian at z=0 of the solutions recessive at the two ends of the line.

    Holomorphic in tau_tilde; zero exactly when a decaying X (hence a
    connecting W) exists.
    """
    _check_line(tau_tilde, theta, truncation_Z)
    left = _shoot(tau_tilde, theta, truncation_Z, -1, rtol).y[:, -1]
    right = _shoot(tau_tilde, theta, truncation_Z, +1, rtol).y[:, -1]
    return complex(left[0] * right[1] - left[1] * right[0])


def _scan_defects(taus, theta, Z, n_steps=1600):
    """Vectorised fixed-step RK4 version of the defect for coarse scanning."""
    taus = np.asarray(taus, dtype=complex)
    e = np.exp(1j * theta)
    out = []
    for side in (-1.0, 1.0):
        s = side * Z
        h = -s / n_steps
        X, dX = _seed(taus, e * s)

        def f(s, X, dX):
            z = e * s
            A = taus - z * z
            return e * dX, e * (6.0 * z * dX / A + (1j * A + 6.0 / A) * X)

        for _ in range(n_steps):
            k1 = f(s, X, dX)
            k2 = f(s + h / 2, X + h / 2 * k1[0], dX + h / 2 * k1[1])
            k3 = f(s + h / 2, X + h / 2 * k2[0], dX + h / 2 * k2[1])
            k4 = f(s + h, X + h * k3[0], dX + h * k3[1])
            X = X + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            dX = dX + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            s += h
        out.append((X, dX))
    (XL, dXL), (XR, dXR) = out
    return XL * dXR - dXL * XR


@dataclass
class ShearLayerProfile:
    tau_tilde: complex
    tau: complex
    ray_angle_theta: float
    z_grid: np.ndarray
    W_tilde: np.ndarray
    X_samples: np.ndarray
    defect: complex
    decay_rate_alpha: float
    truncation_Z: float = 8.0
    curvature: float | None = None
    V_tilde: np.ndarray | None = None
    V: np.ndarray | None = None
    z_phys: np.ndarray | None = None
    jumps: dict | None = None
    newton_trace: list = field(default_factory=list, repr=False)
    _left: object = field(default=None, repr=False)
    _right: object = field(default=None, repr=False)
    _kappa: complex = field(default=1.0, repr=False)
    _total: complex = field(default=1.0, repr=False)

    def fields(self, s):
        """Normalised (W, W - 1, X, X', X'') at ray parameters s (z = e^{i theta} s).

        Beyond the truncation point the Gaussian tail is below 1e-12 and the
        profile is taken as exactly 0 (left) or 1 (right).
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        e = np.exp(1j * self.ray_angle_theta)
        Z = self.truncation_Z
        W = np.zeros(s.shape, complex)
        Wm1 = np.zeros(s.shape, complex)
        X = np.zeros(s.shape, complex)
        dX = np.zeros(s.shape, complex)
        left = (s < 0) & (s > -Z)
        right = (s >= 0) & (s < Z)
        if np.any(left):
            y = self._left(s[left])
            X[left], dX[left], W[left] = y[0], y[1], y[2]
            X[left] /= self._total
            dX[left] /= self._total
            W[left] /= self._total
            Wm1[left] = W[left] - 1.0
        if np.any(right):
            y = self._right(s[right])
            c = self._kappa / self._total
            X[right], dX[right], Wm1[right] = c * y[0], c * y[1], c * y[2]
            W[right] = 1.0 + Wm1[right]
        W[s >= Z] = 1.0
        Wm1[s <= -Z] = -1.0
        z = e * s
        inside = left | right
        d2X = np.zeros(s.shape, complex)
        d2X[inside] = x_second_derivative(self.tau_tilde, z[inside], X[inside], dX[inside])
        return {"z": z, "W": W, "Wm1": Wm1, "X": X, "dX": dX, "d2X": d2X}


def collocation_tau(n: int = 120, half_width: float = 8.0, near: complex = -0.7 - 0.7j,
                    theta: float = 0.0):
    """Independent oracle: Chebyshev collocation of the decaying-X problem.

    With X(+/-L) = 0 the X equation is a quadratic eigenproblem in tau,

        tau^2 X + tau (i X'' - 2 z^2 X) + (-i z^2 X'' - 6 i z X' + (z^4 - 6 i) X) = 0,

    which is linearised to a 2(n-1) generalised eigenproblem.  Returns the
    eigenvalue nearest ``near`` together with all eigenvalues.
    """
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)
    c = np.where((k == 0) | (k == n), 2.0, 1.0) * (-1.0) ** k
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    e = np.exp(1j * theta)
    scale = e * half_width  # z = scale * x
    D1 = D / scale
    D2 = D1 @ D1
    z = scale * x
    inner = slice(1, n)
    Z = np.diag(z[inner])
    I = np.eye(n - 1)
    D1i = D1[inner, inner]
    D2i = D2[inner, inner]
    C = 1j * D2i - 2.0 * Z @ Z
    K = -1j * Z @ Z @ D2i - 6j * Z @ D1i + (Z**4 - 6j * I)
    O = np.zeros_like(I)
    big_A = np.block([[O, I], [-K, -C]])
    big_B = np.block([[I, O], [O, I]])
    vals = linalg.eig(big_A, big_B, right=False)
    vals = vals[np.isfinite(vals)]
    best = vals[np.argmin(np.abs(vals - near))]
    return complex(best), vals


def solve_tau(scan_region=DEFAULT_SCAN, theta: float = 0.0, truncation_Z: float = 8.0,
              n_re: int = 25, n_im: int = 14, tol: float = 1e-10, n_grid: int = 1601,
              rtol: float = 1e-12) -> ShearLayerProfile:
    """Scan |defect| on a grid, refine the best basin by complex Newton, build W."""
    (re0, re1), (im0, im1) = scan_region
    if im1 >= 0.0:
        raise ValueError("scan region must lie in the lower half-plane")
    re = np.linspace(re0, re1, n_re)
    im = np.linspace(im0, im1, n_im)
    T = re[None, :] + 1j * im[:, None]
    with np.errstate(all="ignore"):
        D = np.abs(_scan_defects(T.ravel(), theta, truncation_Z)).reshape(T.shape)
    D[~np.isfinite(D)] = np.inf
    # interior local minima of a holomorphic modulus sit near zeros
    cands = []
    for i in range(n_im):
        for j in range(n_re):
            nb = D[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if D[i, j] <= nb.min() and np.isfinite(D[i, j]):
                cands.append((D[i, j], T[i, j]))
    cands.sort(key=lambda t: t[0])
    if not cands:
        raise NoRootInRegion("no local minimum of |defect| in the scan region")

    dre = (re1 - re0) / max(n_re - 1, 1)
    dim = (im1 - im0) / max(n_im - 1, 1)
    func = lambda t: connection_defect(t, theta, truncation_Z, rtol)
    last_err = None
    for _, start in cands[:6]:
        try:
            root, res, trace = complex_newton(func, start, tol=tol, max_step=max(dre, dim))
        except Exception as err:  # try the next basin
            last_err = err
            continue
        inside = (re0 - dre <= root.real <= re1 + dre) and (im0 - dim <= root.imag < 0.0)
        if inside:
            return _build_profile(root, res, theta, truncation_Z, n_grid, rtol, trace)
    if last_err is not None:
        raise last_err
    raise NoRootInRegion("Newton from every scan minimum left the region")


def profile_on_ray(profile: ShearLayerProfile, theta: float, tol: float = 1e-10,
                   rtol: float = 1e-12) -> ShearLayerProfile:
    """Same eigenvalue, profile rebuilt on the line arg z = theta.

    The root does not depend on the ray inside the decay sector; it is
    polished by Newton on the new line before the profile is rebuilt.
    """
    if theta == profile.ray_angle_theta:
        return profile
    Z = profile.truncation_Z
    func = lambda t: connection_defect(t, theta, Z, rtol)
    root, res, trace = complex_newton(func, profile.tau_tilde, tol=tol, min_iter=1)
    n_grid = max(len(profile.z_grid), 3)
    return _build_profile(root, res, theta, Z, n_grid, rtol, trace)


def _build_profile(tau_tilde, defect, theta, Z, n_grid, rtol, trace):
    half = n_grid // 2
    s_left = np.linspace(-Z, 0.0, half + 1)
    s_right = np.linspace(0.0, Z, half + 1)
    left = _shoot(tau_tilde, theta, Z, -1, rtol, with_integral=True, dense=True)
    right = _shoot(tau_tilde, theta, Z, +1, rtol, with_integral=True, dense=True)
    L0 = left.y[:, -1]
    R0 = right.y[:, -1]
    kappa = L0[0] / R0[0]
    total = L0[2] - kappa * R0[2]

    prof = ShearLayerProfile(
        tau_tilde=complex(tau_tilde), tau=complex(tau_tilde) / np.sqrt(2.0),
        ray_angle_theta=float(theta), z_grid=np.empty(0), W_tilde=np.empty(0),
        X_samples=np.empty(0), defect=complex(defect), decay_rate_alpha=np.nan,
        truncation_Z=float(Z), newton_trace=list(trace),
        _left=left.sol, _right=right.sol, _kappa=kappa, _total=total)
    s = np.concatenate([s_left[:-1], s_right])
    f = prof.fields(s)
    prof.z_grid = f["z"]
    prof.W_tilde = f["W"]
    prof.X_samples = f["X"]
    prof.decay_rate_alpha = _fit_gaussian(np.abs(s), np.abs(f["X"]))[0]
    return prof


def _fit_gaussian(r, mag, r_min=2.0):
    """Fit log|X| = c0 + c1 log r - alpha r^2 on r >= r_min; returns (alpha, R^2)."""
    sel = (r >= r_min) & (mag > 1e-250)
    if np.count_nonzero(sel) < 8:
        raise FitFailed("too few non-underflowed samples for the decay fit")
    r, y = r[sel], np.log(mag[sel])
    A = np.vstack([np.ones_like(r), np.log(r), -r * r]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - pred) ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[2]), float(r2)


def physical_scale(curvature: float) -> float:
    """z = scale * z_tilde."""
    return 2.0 ** 0.25 * abs(curvature) ** -0.25


def build_V_profiles(profile: ShearLayerProfile, curvature: float,
                     jump_tol: float = 1e-6) -> ShearLayerProfile:
    """Attach V_tilde = (tau + c z^2/2) W and V = V_tilde - H(z)(tau + c z^2/2).

    The jumps of V at z=0 are measured from one-sided finite differences of
    the sampled profile (not from the construction) and must reproduce
    [V] = -tau, [V'] = 0, [V''] = -c.
    """
    if curvature >= 0.0:
        raise ValueError("curvature must be negative")
    tau = np.sqrt(abs(curvature) / 2.0) * profile.tau_tilde
    sc = physical_scale(curvature)
    z = sc * profile.z_grid
    A = tau + 0.5 * curvature * z * z
    f = profile.fields(np.real(profile.z_grid * np.exp(-1j * profile.ray_angle_theta)))
    right = np.real(profile.z_grid * np.exp(-1j * profile.ray_angle_theta)) >= 0
    V_tilde = A * f["W"]
    V = np.where(right, A * f["Wm1"], V_tilde)

    i0 = int(np.argmin(np.abs(profile.z_grid)))
    h = z[i0 + 1] - z[i0]
    jumps = {}
    npts = 7
    targets = {0: -tau, 1: 0.0, 2: -curvature}
    for order in range(3):
        w = fd_weights(0.0, np.arange(npts), order) / h**order
        right_val = np.dot(w, V[i0:i0 + npts])
        # left limit uses the left branch continued to z=0 (the z=0 sample is Vtilde there)
        left_samples = V_tilde[i0 - npts + 1:i0 + 1][::-1]
        left_val = np.dot(fd_weights(0.0, -np.arange(npts), order) / h**order, left_samples)
        jumps[order] = complex(right_val - left_val)
        err = abs(jumps[order] - targets[order])
        if err > jump_tol:
            raise JumpMismatch(f"jump of V^({order}) off by {err:.3e}")
    return dataclasses.replace(profile, tau=complex(tau), curvature=float(curvature),
                               V_tilde=V_tilde, V=V, z_phys=z, jumps=jumps)


@dataclass(frozen=True)
class RayDecay:
    theta: float
    alpha: float
    r_squared: float
    alpha_W_right: float
    alpha_W_left: float


def in_sector(theta: float, delta: float = 0.0) -> bool:
    for lo, hi in (SECTOR_RIGHT, SECTOR_LEFT):
        t = (theta - lo) % (2 * np.pi) + lo
        if lo + delta < t < hi - delta:
            return True
    return False


def verify_sector_decay(profile: ShearLayerProfile, sector=(0.0, np.pi / 8),
                        delta: float = 0.05, n_rays: int = 3, Z: float | None = None):
    """Integrate the solved mode along several rays and fit its Gaussian decay."""
    lo, hi = sector
    if not (in_sector(lo, delta) and in_sector(hi, delta)
            and in_sector(0.5 * (lo + hi), delta)):
        raise OutsideSector(f"sector ({lo:.4g}, {hi:.4g}) is not inside a decay sector")
    thetas = np.linspace(lo, hi, n_rays) if n_rays > 1 else np.array([lo])
    reports = []
    for th in thetas:
        # rays are parametrised so that s > 0 lies in the right-hand sector
        base = th if in_sector(th, 0.0) and abs(th) < np.pi / 2 else th - np.pi
        alpha_th = ray_decay_rate(base)
        Zr = Z if Z is not None else min(12.0, np.sqrt(30.0 / alpha_th))
        p = _build_profile(profile.tau_tilde, profile.defect, base, Zr, 801, 1e-11, [])
        s = np.real(p.z_grid * np.exp(-1j * base))
        alpha, r2 = _fit_gaussian(np.abs(s), np.abs(p.X_samples))
        f = p.fields(s)
        aR, _ = _fit_gaussian(s[s > 0], np.abs(f["Wm1"][s > 0]))
        aL, _ = _fit_gaussian(-s[s < 0], np.abs(f["W"][s < 0]))
        reports.append(RayDecay(float(th), alpha, r2, aR, aL))
    return reports


def export_csv(profile: ShearLayerProfile, path) -> Path:
    path = Path(path)
    V = profile.V if profile.V is not None else np.full(profile.z_grid.shape, np.nan)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_z", "im_z", "re_W", "im_W", "re_V", "im_V"])
        for zz, ww, vv in zip(profile.z_grid, profile.W_tilde, V):
            w.writerow([f"{v:.16e}" for v in (zz.real, zz.imag, ww.real, ww.imag,
                                                 vv.real, vv.imag)])
    return path
