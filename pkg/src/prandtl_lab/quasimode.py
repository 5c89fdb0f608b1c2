"""Approximate unstable modes of the spectral operator and their residuals.

The profile v(y) of an approximate solution of

    O v := (w + u_s) v' - u_s' v + i e v''' = 0,   v(0) = v'(0) = 0

is assembled from three kinds of terms:

* the regular part H(y - a) (u_s + w), an exact solution of the inviscid
  operator on each side of a;
* the shear-layer part sqrt(e) A(z) (W(z) - H(z)), z = (y - a) / e^{1/4},
  A(z) = tau + u_s''(a) z^2 / 2, which cancels the jumps of the regular part
  and vanishes away from a;
* regular corrections e^{i/2} v_i, i >= 2, solving
  (w + u_s) v_i' - u_s' v_i = f^i with f^2 = -i H u_s''' and
  f^4 = -i v_2''' (f^3 = 0).

Every part carries exact derivatives up to third order, so the residual is
evaluated analytically rather than by differentiating samples.
(w, e) = (omega, eps) for time growth and (1/omega, -eps/omega) for x growth.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson

from . import dispersion
from ._numerics import derivative
from .errors import CriticalLayerHit, RayMismatch, UnderResolved
from .shear_flow import ShearFlow
from .shear_layer import ShearLayerProfile, physical_scale, profile_on_ray

IVP, BVP = dispersion.IVP, dispersion.BVP
N_DERIV = 4  # derivatives 0..N_DERIV-1 = 0..3 are carried for every part


def make_grid(flow: ShearFlow, n_points: int = 4096, y_max: float | None = None) -> np.ndarray:
    """Uniform grid on [0, y_max] with a node exactly at the critical point."""
    y_max = 2.0 * flow.M if y_max is None else y_max
    h0 = y_max / (n_points - 1)
    n_left = max(1, int(round(flow.a / h0)))
    h = flow.a / n_left
    n = int(np.floor(y_max / h + 1e-9)) + 1
    return h * np.arange(n)


def layer_ray_angle(eps_tilde: complex) -> float:
    """Argument of e^{-1/4}: the ray along which the layer profile is needed."""
    return float(-np.angle(eps_tilde) / 4.0)


def _heaviside(y, a):
    return (np.asarray(y) >= a).astype(float)


def build_regular_part(flow: ShearFlow, omega_tilde: complex, grid) -> np.ndarray:
    """H(y - a) (u_s - u_s(a) - u_s''(a) (y - a)^2 / 2).

    Paired with :func:`build_shear_layer_part` this is the textbook split; its
    pieces grow like (y - a)^2 and cancel in the sum, so the assembly below
    uses the equivalent split with decaying layer tails.  ``omega_tilde`` is
    accepted for interface symmetry; the cut profile does not depend on it.
    """
    y = np.asarray(grid, dtype=float)
    a = flow.a
    return _heaviside(y, a) * (flow(y) - flow.u_a - 0.5 * flow.curvature * (y - a) ** 2)


def build_shear_layer_part(profile: ShearLayerProfile, eps_tilde: complex, grid, a: float,
                           curvature: float = -1.0, ray_tol: float = 1e-8) -> np.ndarray:
    """e^{1/2} V_tilde((y - a) / e^{1/4}) with principal-branch powers."""
    theta = layer_ray_angle(eps_tilde)
    if abs(theta - profile.ray_angle_theta) > ray_tol:
        raise RayMismatch(f"profile solved on arg z = {profile.ray_angle_theta:.3e}, "
                          f"needed {theta:.3e}")
    y = np.asarray(grid, dtype=float)
    e4 = eps_tilde ** 0.25
    z = (y - a) / e4
    s = np.real(z * np.exp(-1j * theta)) / physical_scale(curvature)
    f = profile.fields(s)
    tau = np.sqrt(abs(curvature) / 2.0) * profile.tau_tilde
    A = tau + 0.5 * curvature * z * z
    return np.sqrt(eps_tilde) * A * f["W"]


@dataclass
class Part:
    """Samples of a profile and its first three derivatives (rows 0..3)."""
    derivs: np.ndarray

    @property
    def value(self):
        return self.derivs[0]


def _regular(flow, y, w):
    H = _heaviside(y, flow.a)
    d = np.array([flow(y, j) for j in range(N_DERIV)], dtype=complex)
    d[0] += w
    return Part(H * d)


def _layer(flow, profile, y, w, e):
    a, c = flow.a, flow.curvature
    theta = layer_ray_angle(e)
    if abs(theta - profile.ray_angle_theta) > 1e-8:
        raise RayMismatch(f"profile solved on arg z = {profile.ray_angle_theta:.3e}, "
                          f"needed {theta:.3e}")
    sc = physical_scale(c)
    e4 = e ** 0.25
    z = (y - a) / e4
    s = np.real(z * np.exp(-1j * theta)) / sc
    f = profile.fields(s)
    tau = np.sqrt(abs(c) / 2.0) * profile.tau_tilde
    A, dA, d2A = tau + 0.5 * c * z * z, c * z, c
    WmH = np.where(s >= 0.0, f["Wm1"], f["W"])
    W1, W2, W3 = f["X"] / sc, f["dX"] / sc**2, f["d2X"] / sc**3
    G = np.array([A * WmH,
                  dA * WmH + A * W1,
                  d2A * WmH + 2 * dA * W1 + A * W2,
                  3 * d2A * W1 + 3 * dA * W2 + A * W3])
    scale = np.sqrt(e) * e4 ** -np.arange(N_DERIV)
    return Part(scale[:, None] * G), A


def _solve_transport(flow, y, w, f_derivs, n_out):
    """v = H (u_s + w) int_a^y f / (u_s + w)^2 and derivatives 0..n_out-1.

    ``f_derivs`` holds f, f', ... on the grid (at least n_out - 1 rows).
    Derivatives follow from differentiating (w + u_s) v' - u_s' v = f:
    (w + u_s) v^{(k+1)} = f^{(k)} - sum_{j>=1} C(k,j) u^{(j)} v^{(k-j+1)}
                                  + sum_{j>=0} C(k,j) u^{(j+1)} v^{(k-j)}.
    """
    a = flow.a
    H = _heaviside(y, a)
    u = [flow(y, j) for j in range(n_out + 1)]
    den = u[0] + w
    active = (H > 0) & (np.abs(f_derivs[0]) > 0)
    if np.any(active) and np.min(np.abs(den[active])) < 1e-8:
        raise CriticalLayerHit("u_s + w vanishes where the forcing is non-zero")
    i0 = int(np.searchsorted(y, a))
    integrand = np.zeros_like(den)
    integrand[i0:] = f_derivs[0][i0:] / den[i0:] ** 2
    I = np.zeros_like(den)
    if len(y) - i0 >= 3:
        yy = y[i0:]
        I[i0:] = (cumulative_simpson(integrand[i0:].real, x=yy, initial=0.0)
                  + 1j * cumulative_simpson(integrand[i0:].imag, x=yy, initial=0.0))
    v = [H * den * I]
    for k in range(n_out - 1):
        acc = f_derivs[k].astype(complex).copy()
        for j in range(1, k + 1):
            acc -= comb(k, j) * u[j] * v[k - j + 1]
        for j in range(0, k + 1):
            acc += comb(k, j) * u[j + 1] * v[k - j]
        v.append(H * acc / np.where(H > 0, den, 1.0))
    return np.array(v)


def build_correction(flow: ShearFlow, omega_tilde: complex, i: int, previous=None,
                     grid=None, n_out: int = N_DERIV) -> Part:
    """Regular correction v_i with forcing f^i from the lower-order terms.

    f^2 = -i H u_s''' (diffusion of the regular part), f^3 = 0 and
    f^4 = -i v_2''' (diffusion of the first correction).  ``previous`` maps
    i -> Part for i < this one; v_2 must carry derivatives up to order 5
    when v_4 is requested.
    """
    y = np.asarray(grid, dtype=float)
    H = _heaviside(y, flow.a)
    if i == 2:
        f = np.array([-1j * H * flow(y, 3 + k) for k in range(n_out)])
    elif i == 3:
        return Part(np.zeros((n_out, y.size), complex))
    elif i == 4:
        v2 = previous[2].derivs
        if v2.shape[0] < 3 + n_out:
            raise ValueError("v_2 needs derivatives up to order 2 + n_out")
        f = np.array([-1j * v2[3 + k] for k in range(n_out)])
    else:
        raise ValueError("corrections are implemented for i = 2, 3, 4")
    return Part(_solve_transport(flow, y, omega_tilde, f, n_out))


@dataclass
class Quasimode:
    variant: str
    epsilon: float
    order_n: int
    omega: complex
    omega_tilde: complex
    eps_tilde: complex
    y_grid: np.ndarray
    V_profile: np.ndarray
    U_profile: np.ndarray
    corrections: list
    residual_R: np.ndarray | None = None
    norms: dict = field(default_factory=dict)
    wall_correction: float = 0.0
    V_derivs: np.ndarray | None = field(default=None, repr=False)
    parts: dict = field(default_factory=dict, repr=False)


def assemble_quasimode(flow: ShearFlow, profile: ShearLayerProfile, epsilon: float, n: int,
                       variant: str = IVP, n_points: int = 4096, y_max: float | None = None,
                       omega: complex | None = None, wall_fix: bool = True,
                       adapt_ray: bool = True) -> Quasimode:
    """Sum regular, shear-layer and correction parts, then restore v(0)=v'(0)=0.

    With ``adapt_ray`` the layer profile is rebuilt on the ray required by
    eps_tilde when it was solved on another one; otherwise a mismatch
    raises :class:`RayMismatch`.
    """
    if not 1 <= n <= 4:
        raise ValueError("order n must be in 1..4")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    tau = np.sqrt(abs(flow.curvature) / 2.0) * profile.tau_tilde
    if omega is None:
        omega = dispersion.predicted_omega(flow, epsilon, tau, variant)
    w, e = dispersion._coefficients(variant, epsilon, omega)
    y = make_grid(flow, n_points, y_max)
    theta = layer_ray_angle(e)
    if adapt_ray and abs(theta - profile.ray_angle_theta) > 1e-8:
        profile = profile_on_ray(profile, theta)

    parts = {"regular": _regular(flow, y, w)}
    parts["layer"], _ = _layer(flow, profile, y, w, e)
    corrections = []
    if n >= 2:
        need = 3 + N_DERIV if n >= 4 else N_DERIV
        v2 = build_correction(flow, w, 2, grid=y, n_out=need)
        corr = {2: v2}
        if n >= 3:
            corr[3] = build_correction(flow, w, 3, corr, grid=y)
        if n >= 4:
            corr[4] = build_correction(flow, w, 4, corr, grid=y)
        for i in sorted(corr):
            part = Part(e ** (i / 2.0) * corr[i].derivs[:N_DERIV])
            parts[f"v{i}"] = part
            corrections.append(corr[i].derivs[0])

    total = sum(p.derivs for p in parts.values())
    size = 0.0
    if wall_fix:
        mu = -np.sqrt(1j * w / e)
        A0 = total[0, 0]
        B0 = total[1, 0] - mu * A0
        ex = np.exp(mu * y)
        poly = [A0 + B0 * y, B0 * np.ones_like(y), 0 * y, 0 * y]
        # derivatives of (A + B y) e^{mu y}
        fix = np.zeros_like(total)
        for k in range(N_DERIV):
            fix[k] = sum(comb(k, j) * mu ** (k - j) * poly[j] for j in range(k + 1)) * ex
        parts["wall"] = Part(-fix)
        total = total - fix
        size = float(max(abs(A0), abs(B0)))

    U = total[1] if variant == IVP else -1j * total[1] / omega
    mode = Quasimode(variant=variant, epsilon=float(epsilon), order_n=n, omega=complex(omega),
                     omega_tilde=complex(w), eps_tilde=complex(e), y_grid=y,
                     V_profile=total[0], U_profile=U, corrections=corrections,
                     wall_correction=size, V_derivs=total, parts=parts)
    mode.residual_R = apply_linearized_operator(flow, mode)
    for k in range(3):
        mode.norms[("U", 1.0, k)] = weighted_sobolev_norm(U, 1.0, k, y)
        mode.norms[("R", 1.0, k)] = weighted_sobolev_norm(mode.residual_R, 1.0, k, y)
    mode.norms[("U", 0.0, 0)] = weighted_sobolev_norm(U, 0.0, 0, y)
    return mode


def spectral_operator(flow: ShearFlow, w: complex, e: complex, y, derivs) -> np.ndarray:
    """(w + u_s) v' - u_s' v + i e v''' from samples of v, v', v'', v'''."""
    return (w + flow(y)) * derivs[1] - flow(y, 1) * derivs[0] + 1j * e * derivs[3]


def apply_linearized_operator(flow: ShearFlow, mode) -> np.ndarray:
    """Residual of the assembled profile under the mode-reduced operator.

    For a mode exp(i (x + omega t) / eps) U(y) with U = v', the linearised
    operator returns (i / eps) times this profile residual; the profile
    residual is what is reported and scaled.  Each part is handled on its
    own with analytic derivatives so the cancellations happen between
    smooth arrays.
    """
    y = mode.y_grid
    if not mode.parts:
        return spectral_operator(flow, mode.omega_tilde, mode.eps_tilde, y, mode.V_derivs)
    total = np.zeros(y.size, complex)
    for p in mode.parts.values():
        total += spectral_operator(flow, mode.omega_tilde, mode.eps_tilde, y, p.derivs)
    return total


def weighted_sobolev_norm(samples, weight_exponent: float, k: int, grid,
                          layer_width: float | None = None) -> float:
    """sqrt(sum_{j<=k} int |e^{w y} d^j f|^2) by trapezoidal quadrature.

    Derivatives are centred differences with one-sided closure on the
    (uniform) grid.  ``layer_width`` triggers the resolution check.
    """
    if not 0 <= k <= 3:
        raise ValueError("k must be in 0..3")
    y = np.asarray(grid, dtype=float)
    f = np.asarray(samples)
    h = y[1] - y[0]
    if layer_width is not None and layer_width / h < 16:
        raise UnderResolved(f"{layer_width / h:.1f} points across the layer (need 16)")
    weight = np.exp(weight_exponent * y)
    total = 0.0
    d = f
    for j in range(k + 1):
        if j > 0:
            d = derivative(f, h, order=j, accuracy=4)
        total += np.trapezoid(np.abs(weight * d) ** 2, y)
    return float(np.sqrt(total))


def export_csv(mode: Quasimode, path) -> Path:
    path = Path(path)
    R = mode.residual_R if mode.residual_R is not None else np.zeros_like(mode.V_profile)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "re_U", "im_U", "re_V", "im_V", "re_R", "im_R"])
        for row in zip(mode.y_grid, mode.U_profile, mode.V_profile, R):
            yy, U, V, r = row
            w.writerow([f"{v:.16e}" for v in (yy, U.real, U.imag, V.real, V.imag,
                                                 r.real, r.imag)])
    return path


def norm_table_json(modes, path) -> Path:
    rows = []
    for m in modes:
        for (name, wexp, k), val in sorted(m.norms.items(), key=lambda t: str(t[0])):
            rows.append({"epsilon": m.epsilon, "n": m.order_n, "field": name,
                         "weight": wexp, "k": k, "norm": val})
    rows.sort(key=lambda r: (r["epsilon"], r["n"], r["field"], r["weight"], r["k"]))
    Path(path).write_text(json.dumps(rows, indent=2))
    return Path(path)
