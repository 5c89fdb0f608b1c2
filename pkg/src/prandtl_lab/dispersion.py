"""Eigenvalues of the Fourier-side spectral problem by compound-matrix shooting.

The spectral equation is

    (w + u_s) v' - u_s' v + i e v''' = 0,   v(0) = v'(0) = 0,

with (w, e) = (omega, eps) for the time-growth problem and
(w, e) = (1/omega, -eps/omega) for the x-growth problem.  Beyond y = M the
coefficients are constant and the admissible solutions are the constant and
the decaying exponential exp(mu y), mu = -sqrt(i (w + U) / e).

The two-dimensional admissible space is carried by its Plucker coordinates
phi = (v_a v_b' - v_a' v_b, v_a v_b'' - v_a'' v_b, v_a' v_b'' - v_a'' v_b'),
which satisfy a linear 3x3 system.  The defect is phi_1(0), the determinant
of (v, v') at the wall.  Its absolute size carries the arbitrary far-field
normalisation, so convergence is judged relative to the defect a fixed
distance (a quarter of sqrt(eps)) away from the predicted eigenvalue.

Ratios such as phi_1 / phi_2 look scale-free but are useless here: every
Plucker coordinate is proportional to the same connection coefficient, which
cancels and leaves a pole/zero pair an exponentially small distance apart.  The system is integrated after removing the local
exponential rate mu(y), continued along y so the result stays holomorphic in
omega.
"""
from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from ._numerics import complex_newton
from .errors import (BranchCrossing, FarFieldDegenerate,
                     StiffnessOverflow, WrongBranch)
from .shear_flow import ShearFlow

IVP = "IVP"
BVP = "BVP"


@dataclass
class DispersionResult:
    variant: str
    epsilon: float
    omega: complex
    omega_tilde: complex
    eps_tilde: complex
    predicted_omega: complex
    defect_norm: float
    sigma: float
    tau: complex
    iterations: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def prediction_error(self) -> float:
        """|omega - predicted| / sqrt(eps)."""
        return abs(self.omega - self.predicted_omega) / np.sqrt(self.epsilon)


def _coefficients(variant, epsilon, omega):
    if variant == IVP:
        return complex(omega), complex(epsilon)
    if variant == BVP:
        if omega == 0:
            raise ValueError("omega must be non-zero for the x-growth problem")
        return 1.0 / complex(omega), -complex(epsilon) / complex(omega)
    raise ValueError(f"unknown variant {variant!r}")


def _rate_branch(flow: ShearFlow, w, e):
    """Rotation and sign fixing a branch of mu(y) = +/- sqrt(i (w + u_s(y)) / e).

    As y runs over [0, inf), zeta = i (w + u_s) / e stays on the segment
    {i (w + x) / e : 0 <= x <= max u_s}.  The square-root cut is placed on the
    ray pointing away from that segment, so mu is analytic along the whole
    path and holomorphic in w; the sign makes mu decay in the far field.
    """
    ends = 1j * (w + np.array([0.0, flow.sup_abs()])) / e
    mid = ends.mean()
    rot = mid / abs(mid) if abs(mid) > 0 else 1.0
    zeta_far = 1j * (w + flow.U) / e
    mu_far = np.sqrt(zeta_far / rot) * np.sqrt(rot)
    sign = -1.0 if mu_far.real > 0 else 1.0
    return rot, sign


class _Shooter:
    def __init__(self, flow, w, e, y_max):
        self.flow, self.w, self.e = flow, complex(w), complex(e)
        if abs(self.w + flow.U) < 1e-12:
            raise FarFieldDegenerate("w + U = 0: the far-field roots collide")
        self.y_max = float(y_max)
        self.rot, self.sign = _rate_branch(flow, self.w, self.e)
        self.sqrt_rot = np.sqrt(self.rot)
        self.ie = 1j / self.e
        self.mu_far = self.rate(self.ie * (self.w + flow.U))

    def rate(self, zeta):
        return self.sign * np.sqrt(zeta / self.rot) * self.sqrt_rot

    def coeffs(self, y):
        u, du = self.flow.scalar(y)
        return self.ie * (self.w + u), -self.ie * du

    def compound_rhs(self, y, psi):
        p, q = self.coeffs(y)
        m = self.rate(p)
        return np.array([psi[1] - m * psi[0],
                         p * psi[0] + psi[2] - m * psi[1],
                         -q * psi[0] - m * psi[2]])

    def defect(self, rtol=1e-11):
        psi0 = np.array([1.0, self.mu_far, 0.0], dtype=complex)
        sol = solve_ivp(self.compound_rhs, (self.y_max, 0.0), psi0, method="DOP853",
                        rtol=rtol, atol=1e-14)
        if not sol.success:
            raise StiffnessOverflow(sol.message)
        psi = sol.y[:, -1]
        if not np.all(np.isfinite(psi)):
            raise StiffnessOverflow("compound solution overflowed")
        return complex(psi[0]), psi

    def system_rhs(self, y, Y):
        p, q = self.coeffs(y)
        Y = Y.reshape(3, 2)
        return np.vstack([Y[1], Y[2], q * Y[0] + p * Y[1]]).ravel()


def spectral_defect(flow: ShearFlow, w: complex, e: complex, y_max: float | None = None,
                    rtol: float = 1e-11) -> complex:
    """Defect of the spectral equation in normal form with coefficients (w, e)."""
    y_max = 2.0 * flow.M if y_max is None else y_max
    return _Shooter(flow, w, e, y_max).defect(rtol)[0]


def shoot_dispersion(flow: ShearFlow, epsilon: float, omega: complex, variant: str = IVP,
                     y_max: float | None = None, rtol: float = 1e-11) -> complex:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    w, e = _coefficients(variant, epsilon, omega)
    return spectral_defect(flow, w, e, y_max, rtol)


def far_field_rates(epsilon: complex, omega_plus_U: complex):
    """Roots of i e mu^3 + (w + U) mu = 0."""
    r = np.sqrt(1j * omega_plus_U / epsilon)
    return np.array([0.0, r, -r])


def growth_rate_sigma(flow: ShearFlow, tau: complex) -> float:
    """Spatial growth constant |Im tau| / u_s(a)^{3/2}."""
    if np.imag(tau) >= 0.0:
        raise ValueError("tau must have negative imaginary part")
    return float(abs(np.imag(tau)) / flow.u_a ** 1.5)


def solve_omega_bvp(flow: ShearFlow, epsilon: float, tau: complex, tol: float = 1e-13,
                    max_iter: int = 50) -> complex:
    """Root of F(z) = z + u_s(a) - (-eps z)^{1/2} tau near -u_s(a); returns 1/z."""
    ua = flow.u_a

    def F(z):
        return z + ua - np.sqrt(-epsilon * z) * tau

    def dF(z):
        return 1.0 + epsilon * tau / (2.0 * np.sqrt(-epsilon * z))

    for damping in (1.0, 0.5, 0.25, 0.1):
        z = complex(-ua)
        crossed = False
        for _ in range(max_iter):
            step = -F(z) / dF(z)
            z_new = z + damping * step
            a0, a1 = -epsilon * z, -epsilon * z_new
            if a0.real < 0 and a1.real < 0 and np.sign(a0.imag) != np.sign(a1.imag):
                crossed = True
                break
            z = z_new
            if abs(F(z)) < tol and abs(step) < 1e-15 * max(1.0, abs(z)) + tol:
                break
        if not crossed and abs(F(z)) < 1e-12:
            return 1.0 / z
    raise BranchCrossing("Newton iterates for the implicit eigenvalue crossed the branch cut")


def omega_bvp_residual(flow: ShearFlow, epsilon: float, tau: complex, omega: complex) -> float:
    """|F(1/omega)| for the implicit equation solved by :func:`solve_omega_bvp`."""
    z = 1.0 / complex(omega)
    return float(abs(z + flow.u_a - np.sqrt(-epsilon * z) * tau))


def predicted_omega(flow: ShearFlow, epsilon: float, tau: complex, variant: str = IVP) -> complex:
    if variant == IVP:
        return -flow.u_a + np.sqrt(epsilon) * tau
    return solve_omega_bvp(flow, epsilon, tau)


@functools.lru_cache(maxsize=8)
def layer_tau(curvature: float) -> complex:
    """Physical tau from the solved shear-layer problem (cached per curvature)."""
    from .shear_layer import solve_tau
    prof = solve_tau()
    return complex(np.sqrt(abs(curvature) / 2.0) * prof.tau_tilde)


def find_unstable_eigenvalue(flow: ShearFlow, epsilon: float, variant: str = IVP,
                             guess: complex | None = None, tau: complex | None = None,
                             y_max: float | None = None, tol: float = 1e-11,
                             rtol: float = 1e-11) -> DispersionResult:
    """Complex Newton on the shooting defect, started from the asymptotic prediction."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if tau is None:
        tau = layer_tau(flow.curvature)
    pred = predicted_omega(flow, epsilon, tau, variant)
    start = pred if guess is None else complex(guess)
    y_max = 2.0 * flow.M if y_max is None else y_max

    scale = np.sqrt(epsilon)
    ref = abs(shoot_dispersion(flow, epsilon, pred + 0.25 * scale, variant, y_max, rtol))
    func = lambda om: shoot_dispersion(flow, epsilon, om, variant, y_max, rtol) / ref
    omega, defect_norm, trace = complex_newton(func, start, tol=tol, h=1e-6 * scale,
                                               max_step=0.5 * scale, max_iter=40, min_iter=2)
    w, e = _coefficients(variant, epsilon, omega)
    if variant == IVP and omega.imag > 0.0:
        raise WrongBranch(f"converged to a decaying mode omega={omega}")
    if variant == BVP and omega.imag <= 0.0:
        raise WrongBranch(f"converged to a spatially decaying mode omega={omega}")
    sigma = abs(np.imag(tau)) if variant == IVP else growth_rate_sigma(flow, tau)
    return DispersionResult(variant=variant, epsilon=float(epsilon), omega=complex(omega),
                            omega_tilde=complex(w), eps_tilde=complex(e),
                            predicted_omega=complex(pred), defect_norm=defect_norm,
                            sigma=float(sigma), tau=complex(tau), iterations=len(trace) - 1,
                            trace=trace)


def eigenfunction(flow: ShearFlow, result: DispersionResult, y, y_max: float | None = None,
                  n_checkpoints: int = 64, rtol: float = 1e-11):
    """Reconstruct (v, v', v'') on the sample points y, normalised to max |v| = 1.

    The two admissible far-field solutions are integrated toward the wall with
    QR re-orthonormalisation at checkpoints; the combination with v(0) = 0 is
    then propagated back through the stored triangular factors.
    """
    y_max = 2.0 * flow.M if y_max is None else y_max
    sh = _Shooter(flow, result.omega_tilde, result.eps_tilde, y_max)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or np.any(y > y_max):
        raise ValueError(f"sample points must lie in [0, {y_max:g}]")
    mu = sh.mu_far
    basis = np.array([[1.0, 1.0], [0.0, mu], [0.0, mu * mu]], dtype=complex)
    cps = np.linspace(y_max, 0.0, n_checkpoints + 1)
    segs, Rs = [], []
    for y0, y1 in zip(cps[:-1], cps[1:]):
        # the basis is orthonormal at y0, so an absolute floor relative to 1 is safe
        sol = solve_ivp(sh.system_rhs, (y0, y1), basis.ravel(), method="DOP853",
                        rtol=rtol, atol=1e-3 * rtol, dense_output=True)
        end = sol.y[:, -1].reshape(3, 2)
        Q, R = np.linalg.qr(end)
        segs.append(sol.sol)
        Rs.append(R)
        basis = Q
    # combination with v(0) = 0 in the final orthonormal basis; because each
    # basis is orthonormal where its segment starts, the coefficients stay O(1)
    c = np.array([basis[0, 1], -basis[0, 0]])
    c /= np.linalg.norm(c)
    out = np.zeros((3, y.size), complex)
    for k in range(len(segs) - 1, -1, -1):
        c = np.linalg.solve(Rs[k], c)
        y0, y1 = cps[k], cps[k + 1]
        sel = (y <= y0) & (y >= y1)
        if np.any(sel):
            vals = segs[k](y[sel]).reshape(3, 2, -1)
            out[:, sel] = np.einsum("ijn,j->in", vals, c)
    peak = out[0, np.argmax(np.abs(out[0]))]
    return out / peak


def export_csv(results, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "epsilon", "re_omega", "im_omega", "re_pred", "im_pred",
                    "defect", "sigma"])
        for r in sorted(results, key=lambda r: (r.variant, r.epsilon)):
            w.writerow([r.variant, f"{r.epsilon:.10e}", f"{r.omega.real:.16e}",
                        f"{r.omega.imag:.16e}", f"{r.predicted_omega.real:.16e}",
                        f"{r.predicted_omega.imag:.16e}", f"{r.defect_norm:.3e}",
                        f"{r.sigma:.16e}"])
    return path
