"""Piecewise-polynomial shear profiles with an interior non-degenerate maximum.

The canonical profile is made of five pieces::

    [0, m]            u_s = y
    [m, a - r]        C^4 monotone blend
    [a - r, a + r]    u_s = u_a + c (y - a)^2 / 2     (c < 0)
    [a + r, M]        C^4 monotone blend
    [M, inf)          u_s = U

Each blend is built from its derivative: u_s' is a sum of non-negative carrier
pieces that reproduce the end derivatives (to third order) plus a polynomial
bump whose amplitude fixes the total rise/drop.  With all pieces of one sign
the blend is monotone, so ``a`` is the only critical point of the profile.
"""
from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .errors import InfeasibleProfile

MAX_DERIV = 10
_BUMP_INTEGRAL = 1.0 / 630.0  # int_0^1 t^4 (1-t)^4 dt


@dataclass(frozen=True)
class ShearFlowParams:
    far_field_U: float = 1.0
    crit_point_a: float = 1.0
    crit_value: float = 1.5
    curvature: float = -1.0
    linear_radius_m: float = 0.2
    quad_radius: float = 0.25
    support_M: float = 4.0

    @classmethod
    def wide_cap(cls) -> "ShearFlowParams":
        """Profile whose quadratic cap holds the shear layer for eps >= 6e-4.

        Used by the experiment presets: the default cap of half-width 0.25 is
        narrower than the critical layer at every eps in the desk range.
        """
        return cls(far_field_U=0.5, crit_point_a=3.0, crit_value=3.25,
                   curvature=-1.0, linear_radius_m=0.5, quad_radius=2.0,
                   support_M=7.0)

    @classmethod
    def thin_cap(cls) -> "ShearFlowParams":
        """Profile with mild weighted high derivatives to the right of the maximum.

        Meant for very small eps (below 1e-5), where the layer fits inside
        the short cap and its derivatives dominate e^y-weighted norms.
        """
        return cls(far_field_U=0.25, crit_point_a=1.0, crit_value=1.5,
                   curvature=-1.0, linear_radius_m=0.1, quad_radius=0.6,
                   support_M=5.6)

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class _Piece:
    start: float
    end: float
    derivs: tuple  # Polynomial in (y - start) for orders 0..MAX_DERIV
    kind: str
    coefs: tuple = ()  # same polynomials as arrays, highest power first


@dataclass(frozen=True)
class ShearFlow:
    params: ShearFlowParams
    pieces: tuple = field(repr=False)

    @property
    def a(self) -> float:
        return self.params.crit_point_a

    @property
    def u_a(self) -> float:
        return self.params.crit_value

    @property
    def curvature(self) -> float:
        return self.params.curvature

    @property
    def U(self) -> float:
        return self.params.far_field_U

    @property
    def M(self) -> float:
        return self.params.support_M

    @property
    def m(self) -> float:
        return self.params.linear_radius_m

    @property
    def knots(self) -> np.ndarray:
        return np.array([p.start for p in self.pieces[1:]])

    def __call__(self, y, deriv_order: int = 0):
        return eval_flow(self, y, deriv_order)

    def scalar(self, y: float, orders=(0, 1)):
        """Fast path for ODE right-hand sides: several derivatives at one point."""
        starts = self.__dict__.get("_starts")
        if starts is None:
            starts = [p.start for p in self.pieces]
            object.__setattr__(self, "_starts", starts)
        piece = self.pieces[bisect.bisect_right(starts, y) - 1]
        x = y - piece.start
        return [np.polyval(piece.coefs[j], x) for j in orders]

    def sup_abs(self) -> float:
        best = 0.0
        for p in self.pieces:
            cand = [p.start] if np.isinf(p.end) else [p.start, p.end]
            if not np.isinf(p.end):
                for r in p.derivs[1].roots():
                    if abs(r.imag) < 1e-12 and 0.0 <= r.real <= p.end - p.start:
                        cand.append(p.start + r.real)
            best = max(best, float(np.max(np.abs(self(np.array(cand))))))
        return best


def _carrier(p: float) -> Polynomial:
    """phi(s) = (1-s)^4 P(s) with phi(0)=1, phi'(0)=p, phi''(0)=phi'''(0)=0."""
    P = Polynomial([1.0, p + 4.0, 4.0 * p + 10.0, 10.0 * p + 20.0])
    return Polynomial([1.0, -1.0]) ** 4 * P


def _blend(y0, y1, u0, du0, d2u0, u1, du1, d2u1, strict):
    L = y1 - y0
    D = u1 - u0
    sign = np.sign(D)
    bump = Polynomial([0, 0, 0, 0, 1.0]) * Polynomial([1.0, -1.0]) ** 4  # in t
    t = Polynomial([0.0, 1.0])

    t1 = 0.5
    while True:
        segs = []  # (t_start, t_end, poly in t) for u'
        left = right = None
        if du0 != 0.0:
            pL = d2u0 * L * t1 / du0
            left = du0 * _carrier(pL)(t / t1)
        if du1 != 0.0:
            pR = -d2u1 * L * t1 / du1
            right = du1 * _carrier(pR)((1.0 - t) / t1)
        carried = 0.0
        for poly, lo, hi in ((left, 0.0, t1), (right, 1.0 - t1, 1.0)):
            if poly is not None:
                anti = poly.integ()
                carried += anti(hi) - anti(lo)
        beta = (D / L - carried) / _BUMP_INTEGRAL
        ok = (beta * sign >= 0.0
              and (du0 == 0.0 or np.sign(du0) == sign and d2u0 * du0 >= 0.0)
              and (du1 == 0.0 or np.sign(du1) == sign and d2u1 * du1 <= 0.0))
        if ok or not strict or t1 < 1.0 / 256:
            break
        t1 *= 0.5
    if strict and not ok:
        raise InfeasibleProfile(
            f"cannot build a monotone blend on [{y0:g}, {y1:g}] "
            f"(rise {D:g}, end slopes {du0:g}, {du1:g})")

    pieces = []
    cuts = [0.0, t1, 1.0 - t1, 1.0]
    u_start = u0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0.0:
            continue
        g = beta * bump
        if left is not None and lo < t1:
            g = g + left
        if right is not None and hi > 1.0 - t1:
            g = g + right
        ys = y0 + lo * L
        # g(t) with t = lo + x / L, x = y - ys
        gx = g(Polynomial([lo, 1.0 / L]))
        u = gx.integ() + u_start
        pieces.append((ys, y0 + hi * L, u))
        u_start = u(L * (hi - lo))
    return pieces


def _make_piece(start, end, poly, kind):
    derivs = [poly]
    for _ in range(MAX_DERIV):
        derivs.append(derivs[-1].deriv())
    coefs = tuple(np.ascontiguousarray(d.coef[::-1]) for d in derivs)
    return _Piece(float(start), float(end), tuple(derivs), kind, coefs)


def build_shear_flow(params: ShearFlowParams | None = None, strict: bool = True) -> ShearFlow:
    """Construct the canonical profile.

    With ``strict=False`` infeasible parameter sets still produce a profile
    (possibly non-monotone or negative) so that :func:`validate_structure`
    can report what went wrong.
    """
    p = params or ShearFlowParams()
    a, c, k = p.crit_point_a, p.crit_value, p.curvature
    m, r, M, U = p.linear_radius_m, p.quad_radius, p.support_M, p.far_field_U
    if strict:
        if not (0.0 < m < a - r):
            raise InfeasibleProfile("need 0 < m < a - quad_radius")
        if not (a + r < M):
            raise InfeasibleProfile("need a + quad_radius < M")
        if c <= 0.0 or r <= 0.0:
            raise InfeasibleProfile("crit_value and quad_radius must be positive")
        if U < 0.0:
            raise InfeasibleProfile("far-field velocity must be non-negative")

    e0, e1 = a - r, a + r
    cap_edge = c + 0.5 * k * r * r
    pieces = [_make_piece(0.0, m, Polynomial([0.0, 1.0]), "linear")]
    for s, e, poly in _blend(m, e0, m, 1.0, 0.0, cap_edge, -k * r, k, strict):
        pieces.append(_make_piece(s, e, poly, "blend"))
    # cap in x = y - e0: c + k/2 (x - r)^2
    cap = c + 0.5 * k * Polynomial([-r, 1.0]) ** 2
    pieces.append(_make_piece(e0, e1, cap, "cap"))
    for s, e, poly in _blend(e1, M, cap_edge, k * r, k, U, 0.0, 0.0, strict):
        pieces.append(_make_piece(s, e, poly, "blend"))
    pieces.append(_make_piece(M, np.inf, Polynomial([U]), "far"))

    flow = ShearFlow(p, tuple(pieces))
    if strict:
        ys = np.linspace(0.0, M, 20001)[1:]
        if np.min(flow(ys)) <= 0.0:
            raise InfeasibleProfile("profile is not positive on (0, M)")
    return flow


def eval_flow(flow: ShearFlow, y, deriv_order: int = 0):
    """Exact evaluation of d^j u_s / dy^j (piecewise polynomial).

    Orders 0..4 are continuous.  Higher orders are available piecewise for
    the correction terms; they jump at the blend knots.
    """
    if not 0 <= deriv_order <= MAX_DERIV:
        raise ValueError(f"deriv_order must be in 0..{MAX_DERIV}")
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0.0):
        raise ValueError("shear flow is defined for y >= 0 only")
    starts = np.array([p.start for p in flow.pieces])
    idx = np.searchsorted(starts, y_arr, side="right") - 1
    out = np.empty_like(y_arr)
    for i in np.unique(idx):
        sel = idx == i
        piece = flow.pieces[i]
        out[sel] = piece.derivs[deriv_order](y_arr[sel] - piece.start)
    if out.ndim == 0:
        return float(out)
    return out


def energy_constant(flow: ShearFlow) -> float:
    """C_s = sup |u_s| + int_0^inf y |u_s'|^2 dy (exact piecewise integration)."""
    return flow.sup_abs() + _weighted_slope_integral(flow)


def _weighted_slope_integral(flow: ShearFlow) -> float:
    total = 0.0
    for p in flow.pieces:
        if np.isinf(p.end):
            continue
        integrand = Polynomial([p.start, 1.0]) * p.derivs[1] ** 2
        anti = integrand.integ()
        total += anti(p.end - p.start) - anti(0.0)
    return float(total)


def energy_constant_quadrature(flow: ShearFlow, epsabs: float = 1e-13) -> float:
    """Same constant computed by adaptive quadrature over the knot intervals."""
    edges = [p.start for p in flow.pieces] + [flow.M]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        val, _ = integrate.quad(lambda y: y * flow(y, 1) ** 2, lo, hi,
                                epsabs=epsabs, epsrel=1e-13, limit=200)
        total += val
    ys = np.linspace(0.0, flow.M, 200001)
    return float(max(np.max(np.abs(flow(ys))), abs(flow.U))) + total


@dataclass
class StructureReport:
    checks: dict  # name -> (passed, discrepancy)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.checks.values())

    def failed(self) -> list:
        return [name for name, (passed, _) in self.checks.items() if not passed]


def _piece_scale(piece, j):
    width = min(piece.end - piece.start, 1.0) if np.isfinite(piece.end) else 1.0
    return float(np.max(np.abs(piece.derivs[j](np.linspace(0.0, width, 33)))))


def validate_structure(flow: ShearFlow, n_samples: int = 40001) -> StructureReport:
    """Mechanically check every structural hypothesis on the profile."""
    p = flow.params
    a, r, m, M = p.crit_point_a, p.quad_radius, p.linear_radius_m, p.support_M
    checks = {}

    def add(name, discrepancy, tol):
        checks[name] = (bool(discrepancy <= tol), float(discrepancy))

    add("wall_value", abs(flow(0.0)), 1e-15)
    yl = np.linspace(0.0, m, 257)
    add("linear_near_wall", np.max(np.abs(flow(yl) - yl)), 1e-14)
    add("critical_point", abs(flow(a, 1)), 1e-12)
    checks["curvature_negative"] = (bool(flow(a, 2) < 0.0), float(flow(a, 2)))
    yc = np.linspace(a - r, a + r, 257)
    cap = p.crit_value + 0.5 * p.curvature * (yc - a) ** 2
    add("quadratic_cap", np.max(np.abs(flow(yc) - cap)), 1e-13 * max(1.0, p.crit_value))
    yf = np.linspace(M, 3 * M, 257)
    add("far_field", np.max(np.abs(flow(yf) - p.far_field_U)), 0.0)

    ys = np.linspace(0.0, M, n_samples)[1:]
    u = flow(ys)
    checks["positivity"] = (bool(np.min(u) > 0.0), float(np.min(u)))

    du = flow(ys, 1)
    left = ys < a - r
    right = (ys > a + r) & (ys < M)
    bad = np.sum(du[left] < 0.0) + np.sum(du[right] > 0.0)
    checks["single_critical_point"] = (bool(bad == 0), float(bad))

    worst = 0.0
    for knot in flow.knots:
        for j in range(5):
            lo = flow.pieces[_piece_index(flow, knot) - 1]
            hi = flow.pieces[_piece_index(flow, knot)]
            left_val = lo.derivs[j](knot - lo.start)
            right_val = hi.derivs[j](0.0)
            # roundoff in a piece is relative to its largest derivative, not the knot value
            scale = max(1.0, _piece_scale(lo, j), _piece_scale(hi, j))
            worst = max(worst, abs(left_val - right_val) / scale)
    add("c4_continuity", worst, 1e-8)
    return StructureReport(checks)


def _piece_index(flow: ShearFlow, y: float) -> int:
    starts = np.array([p.start for p in flow.pieces])
    return int(np.searchsorted(starts, y, side="right") - 1)


def export_csv(flow: ShearFlow, path, y=None) -> Path:
    """Write (y, u_s, u_s', u_s'', u_s''') samples for plotting."""
    if y is None:
        y = np.linspace(0.0, 2.0 * flow.M, 2001)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "u_s", "du_s", "d2u_s", "d3u_s"])
        cols = [flow(y, j) for j in range(4)]
        for row in zip(y, *cols):
            w.writerow([f"{v:.16e}" for v in row])
    return path
