"""Small numerical helpers shared by the solver modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NewtonDiverged


def complex_newton(func, z0, tol=1e-10, step_tol=1e-14, max_iter=40, h=None,
                   max_step=None, on_iterate=None, min_iter=0):
    """Newton iteration for a holomorphic scalar map.

    The derivative is a centred difference with step ``h`` (relative to |z|
    when not given).  If a Newton step fails to reduce |f| the step is halved
    a few times; if that also fails a secant step from the last two iterates
    is tried.  Returns ``(root, |f(root)|, trace)``.
    """
    z = complex(z0)
    f = func(z)
    trace = [(z, abs(f))]
    z_prev, f_prev = None, None
    for it in range(max_iter):
        if abs(f) < tol and it >= min_iter:
            return z, abs(f), trace
        hh = h if h is not None else 1e-6 * max(1.0, abs(z))
        df = (func(z + hh) - func(z - hh)) / (2.0 * hh)
        if df == 0 or not np.isfinite(df):
            raise NewtonDiverged("zero or non-finite derivative", trace)
        step = -f / df
        if max_step is not None and abs(step) > max_step:
            step *= max_step / abs(step)
        accepted = False
        for _ in range(6):
            z_new = z + step
            if on_iterate is not None:
                z_new = on_iterate(z, z_new)
            f_new = func(z_new)
            if np.isfinite(f_new) and (abs(f_new) < abs(f) or abs(f) < tol):
                accepted = True
                break
            step *= 0.5
        if not accepted and z_prev is not None and f != f_prev:
            z_new = z - f * (z - z_prev) / (f - f_prev)
            f_new = func(z_new)
            accepted = np.isfinite(f_new) and abs(f_new) < abs(f)
        if not accepted:
            # stagnation at roundoff level counts as convergence only if tiny
            if abs(f) < 1e3 * tol:
                return z, abs(f), trace
            raise NewtonDiverged(f"no decrease of |f| from {abs(f):.3e}", trace)
        z_prev, f_prev = z, f
        z, f = z_new, f_new
        trace.append((z, abs(f)))
        if abs(z - z_prev) < step_tol * max(1.0, abs(z)) and abs(f) < 1e3 * tol:
            return z, abs(f), trace
    if abs(f) < tol:
        return z, abs(f), trace
    raise NewtonDiverged(f"no convergence in {max_iter} iterations", trace)


def fd_weights(x0: float, nodes, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 (Fornberg)."""
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative(f, h: float, order: int = 1, accuracy: int = 4) -> np.ndarray:
    """Uniform-grid derivative: centred stencil inside, one-sided at the ends."""
    f = np.asarray(f)
    n = len(f)
    half = (order + accuracy - 1) // 2
    npts = 2 * half + 1
    if n < npts + 1:
        raise ValueError("grid too short for the requested stencil")
    out = np.empty(n, dtype=np.result_type(f, float))
    w_c = fd_weights(0.0, np.arange(-half, half + 1), order) / h**order
    interior = np.zeros(n - 2 * half, dtype=out.dtype)
    for j, w in enumerate(w_c):
        interior = interior + w * f[j:n - 2 * half + j]
    out[half:n - half] = interior
    for i in list(range(half)) + list(range(n - half, n)):
        lo = 0 if i < half else n - npts - 1
        idx = np.arange(lo, lo + npts + 1)
        w = fd_weights(float(i), idx, order) / h**order
        out[i] = np.dot(w, f[idx])
    return out


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r_squared: float
    residual_rms: float


def line_fit(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LineFit(float(slope), float(intercept), r2, float(np.sqrt(ss_res / len(x))))
