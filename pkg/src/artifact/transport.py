"""Parallel transport and the angle function.

Along a curve a parallel field ``X`` is written in the orthonormal chart frame
``(e_r, e_phi / sqrt g)`` as ``X = alpha e_1 + beta e_2``.  The oriented angle
``Theta`` from ``X`` to the tantrix satisfies ``X = cos(Theta) tau - sin(Theta) u``
with ``u`` the conormal, so

    tan(Theta) = (alpha tau_2 - beta tau_1) / (alpha tau_1 + beta tau_2).

Three backends are provided: the sphere system ``alpha' = cos(theta) phi' beta``,
``beta' = -cos(theta) phi' alpha`` (RK4); ``christoffel``, which keeps ``X``
covariantly constant in coordinate components (RK4); and ``chart``, the same
system reduced to the orthonormal frame, where it is a rotation at rate
``w = g_r phi' / (2 sqrt g)`` and is solved by quadrature of ``w``.  At a corner ``X`` is continuous and ``Theta`` jumps by the signed
turning angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bv import BVBreakdown, BVPiece, BVSeries, Jump, essential_variation
from .curve import Plane, chart_curvature, signed_turn

TWO_PI = 2.0 * math.pi


@dataclass
class TransportState:
    s: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    backend: str = "chart"

    def norm_drift(self):
        return float(np.max(np.abs(self.alpha ** 2 + self.beta ** 2 - 1.0)))


@dataclass
class AnglePiece:
    s: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    kind: str = "ac"
    singular_mass: float = 0.0


@dataclass
class AngleSeries:
    """Angle function as pieces with integer turn offsets.

    The angle on piece ``k`` is ``values + 2 pi turns[k]``.  Lifting only
    changes ``turns``, so :meth:`direction` is unaffected bit for bit.
    ``closing`` is the jump at ``s = L`` of a closed curve (the junction
    angle), or ``None``.
    """
    pieces: list
    turns: list
    closing: float | None = None

    def theta(self, k):
        p = self.pieces[k]
        return p.values + TWO_PI * self.turns[k]

    @property
    def grid(self):
        return np.concatenate([p.s for p in self.pieces])

    def direction(self):
        """``(cos, sin)`` of the angle at every sample of every piece."""
        return [(np.cos(p.values), np.sin(p.values)) for p in self.pieces]

    @property
    def jumps(self):
        out = []
        for k in range(1, len(self.pieces)):
            left = float(self.theta(k - 1)[-1])
            right = float(self.theta(k)[0])
            if right != left:
                out.append(Jump(float(self.pieces[k].s[0]), left, right))
        if self.closing:
            end = float(self.theta(len(self.pieces) - 1)[-1])
            out.append(Jump(float(self.pieces[-1].s[-1]), end, end + self.closing))
        return out

    def span(self):
        """``Theta(L-) - Theta(0+)``, interior jumps included."""
        return float(self.theta(len(self.pieces) - 1)[-1] - self.theta(0)[0])

    def to_bv(self):
        pieces = [BVPiece(p.s, self.theta(k), None, p.kind, p.singular_mass)
                  for k, p in enumerate(self.pieces)]
        return BVSeries(pieces, self.jumps)

    def variation(self):
        return essential_variation(self.to_bv(), "euclidean")

    def sample(self, s):
        """Right-continuous evaluation on arbitrary parameters."""
        s = np.asarray(s, dtype=float)
        starts = np.array([p.s[0] for p in self.pieces])
        k = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(s)
        for j in np.unique(k):
            m = k == j
            out[m] = np.interp(s[m], self.pieces[j].s, self.theta(j))
        return out

    def rows(self):
        """Rows ``(s, theta, is_jump, theta_minus, theta_plus)`` for tabular output."""
        jumps = {j.s: j for j in self.jumps}
        out = []
        for k, p in enumerate(self.pieces):
            th = self.theta(k)
            for i, (s, v) in enumerate(zip(p.s, th)):
                if k > 0 and i == 0 and float(s) == float(self.pieces[k - 1].s[-1]):
                    continue
                j = jumps.get(float(s))
                if j is not None:
                    out.append((float(s), float(j.right), 1, float(j.left), float(j.right)))
                else:
                    out.append((float(s), float(v), 0, float(v), float(v)))
        return out


def _fields(surface, pts):
    if isinstance(surface, Plane):
        n = len(pts)
        return np.ones(n), np.zeros(n), np.zeros(n)
    r, phi = pts[:, 0], pts[:, 1]
    g = np.asarray(surface.g(r, phi), dtype=float)
    gr = np.asarray(surface.g_r(r, phi), dtype=float)
    gp = np.asarray(surface.g_phi(r, phi), dtype=float)
    return g, gr, gp


def _rk4_linear(coef, y0, h):
    """RK4 for ``y' = M(s) y`` with ``M`` sampled at nodes and midpoints.

    ``coef`` has shape ``(2m + 1, 2, 2)``: even rows at nodes, odd rows at
    midpoints.
    """
    m = (len(coef) - 1) // 2
    out = np.empty((m + 1, 2))
    y = np.array(y0, dtype=float)
    out[0] = y
    for i in range(m):
        A0, Am, A1 = coef[2 * i], coef[2 * i + 1], coef[2 * i + 2]
        k1 = A0 @ y
        k2 = Am @ (y + 0.5 * h * k1)
        k3 = Am @ (y + 0.5 * h * k2)
        k4 = A1 @ (y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return out


def _transport_segment(surface, seg, X, backend):
    """Carry the orthonormal components ``X`` along one segment."""
    k = len(seg.s)
    if isinstance(surface, Plane):
        return np.tile(X, (k, 1))
    m = k - 1
    h = (seg.s[-1] - seg.s[0]) / m
    _, pts, tan, _ = seg.refined(2 * m)
    if backend == "sphere":
        w = np.cos(pts[:, 0]) * tan[:, 1]
        coef = np.zeros((len(w), 2, 2))
        coef[:, 0, 1] = w
        coef[:, 1, 0] = -w
        return _rk4_linear(coef, X, h)
    g, gr, gp = _fields(surface, pts)
    if backend == "chart":
        # in the orthonormal frame the system is alpha' = w beta, beta' = -w alpha
        w = gr / (2.0 * np.sqrt(g)) * tan[:, 1]
        inc = h / 6.0 * (w[0:-1:2] + 4.0 * w[1::2] + w[2::2])
        ang = np.concatenate([[0.0], np.cumsum(inc)])
        c, sn = np.cos(ang), np.sin(ang)
        return np.stack([X[0] * c + X[1] * sn, X[1] * c - X[0] * sn], -1)
    c122 = -0.5 * gr
    c212 = gr / (2.0 * g)
    c222 = gp / (2.0 * g)
    rd, pd = tan[:, 0], tan[:, 1]
    # a' = -G^1_22 phi' b;  b' = -G^2_12 (r' b + phi' a) - G^2_22 phi' b
    coef = np.zeros((len(g), 2, 2))
    coef[:, 0, 1] = -c122 * pd
    coef[:, 1, 0] = -c212 * pd
    coef[:, 1, 1] = -c212 * rd - c222 * pd
    sg0 = math.sqrt(g[0])
    coords = _rk4_linear(coef, (X[0], X[1] / sg0), h)
    sg = np.sqrt(g[::2])
    return np.stack([coords[:, 0], sg * coords[:, 1]], -1)


def _pick_backend(surface, backend):
    if backend == "auto":
        return "sphere" if getattr(surface, "kind", None) == "sphere" else "chart"
    if backend == "sphere" and getattr(surface, "kind", None) != "sphere":
        raise ValueError("the sphere transport system needs the sphere chart")
    if backend not in ("sphere", "chart", "christoffel"):
        raise ValueError(f"unknown transport backend {backend!r}")
    return backend


def _initial_field(curve, X0):
    surf = curve.surface
    seg = curve.segments[0]
    if X0 is None:
        return surf.orthonormal(seg.points[:1], seg.tangent[:1])[0]
    X = surf.orthonormal(seg.points[:1], np.atleast_2d(np.asarray(X0, dtype=float)))[0]
    if abs(math.hypot(X[0], X[1]) - 1.0) > 1e-9:
        raise ValueError("initial vector must have unit length in the surface metric")
    return X


def transport_curve(curve, X0=None, backend="auto"):
    """Parallel transport along a whole curve, corners and singular pieces included.

    ``X0`` gives the initial vector in coordinate components; by default it
    is the right-hand tangent ``tau(0+)``.  Returns ``(TransportState,
    AngleSeries)``.
    """
    surf = curve.surface
    backend = _pick_backend(surf, backend)
    X = _initial_field(curve, X0)
    alpha = np.empty(curve.n + 1)
    beta = np.empty(curve.n + 1)
    pieces, theta_end = [], None
    for k, seg in enumerate(curve.segments):
        if seg.kind == "singular" and not isinstance(surf, Plane):
            raise ValueError("singular segments are supported on the plane only")
        XX = _transport_segment(surf, seg, X, backend)
        alpha[seg.i0:seg.i1 + 1] = XX[:, 0]
        beta[seg.i0:seg.i1 + 1] = XX[:, 1]
        tau = surf.orthonormal(seg.points, seg.tangent)
        raw = np.arctan2(XX[:, 0] * tau[:, 1] - XX[:, 1] * tau[:, 0],
                         XX[:, 0] * tau[:, 0] + XX[:, 1] * tau[:, 1])
        if k == 0:
            start = raw[0]
        else:
            prev = curve.segments[k - 1]
            start = theta_end + signed_turn(surf, seg.points[0], prev.tangent[-1], seg.tangent[0])
        inc = (np.diff(raw) + math.pi) % TWO_PI - math.pi
        theta = start + np.concatenate([[0.0], np.cumsum(inc)])
        mass = 0.0
        if seg.kind == "singular":
            mass = float(np.sum(np.abs(np.diff(theta))))
        pieces.append(AnglePiece(seg.s, theta, "singular" if seg.kind == "singular" else "ac",
                                 mass))
        theta_end = theta[-1]
        X = XX[-1]
    closing = curve.junction.angle if curve.junction is not None else None
    state = TransportState(curve.s, alpha, beta, backend)
    return state, AngleSeries(pieces, [0] * len(pieces), closing)


def transport_smooth(curve, X0=None, backend="auto"):
    """Parallel transport along a curve without corners.

    Raises ``ValueError`` for curves with corners or singular pieces; use
    :func:`transport_curve` or :func:`transport_polygonal` for those.
    """
    if curve.jumps or any(seg.kind == "singular" for seg in curve.segments):
        raise ValueError("curve has corners or singular pieces; use transport_curve")
    return transport_curve(curve, X0, backend)


def transport_polygonal(poly, X0=None):
    """Angle function of a geodesic polygonal: constant on arcs, jumping at corners.

    The pieces are laid out over the curve parameters of the vertices.
    """
    surf = poly.surface
    p0 = poly.points[:1]
    tau0 = surf.orthonormal(p0, poly.directions[:1])[0]
    if X0 is None:
        theta0 = 0.0
    else:
        X = surf.orthonormal(p0, np.atleast_2d(np.asarray(X0, dtype=float)))[0]
        if abs(math.hypot(X[0], X[1]) - 1.0) > 1e-9:
            raise ValueError("initial vector must have unit length in the surface metric")
        theta0 = math.atan2(X[0] * tau0[1] - X[1] * tau0[0], X[0] * tau0[0] + X[1] * tau0[1])
    turns = poly.signed_turns()
    interior = turns[:-1] if poly.closed else turns
    values = theta0 + np.concatenate([[0.0], np.cumsum(interior)])
    pieces = [AnglePiece(np.array([poly.params[i], poly.params[i + 1]]),
                         np.array([values[i], values[i]])) for i in range(poly.n_arcs)]
    closing = float(turns[-1]) if poly.closed else None
    return AngleSeries(pieces, [0] * len(pieces), closing)


def _lift_turns(jump):
    """Integer ``k`` with ``jump - 2 pi k`` in ``(-pi, pi]``."""
    return math.ceil((jump - math.pi) / TWO_PI)


def optimal_lift(series):
    """Reduce every jump into ``(-pi, pi]`` modulo ``2 pi``; a jump of exactly ``pi`` stays ``+pi``.

    Only the integer turn offsets change, so the absolutely continuous part and
    ``(cos, sin)`` at every sample are untouched.
    """
    turns = list(series.turns)
    for k in range(1, len(series.pieces)):
        left = series.pieces[k - 1].values[-1] + TWO_PI * turns[k - 1]
        right = series.pieces[k].values[0] + TWO_PI * turns[k]
        q = _lift_turns(float(right - left))
        if q:
            for j in range(k, len(turns)):
                turns[j] -= q
    closing = series.closing
    if closing is not None:
        closing = closing - TWO_PI * _lift_turns(closing)
        if closing == 0.0:
            closing = None
    return AngleSeries(series.pieces, turns, closing)


def angle_breakdown(series):
    """Absolutely continuous, jump and Cantor parts of the variation of an angle series.

    Pass an optimally lifted series to compare with the energy functional.
    """
    ac = cantor = 0.0
    for k, p in enumerate(series.pieces):
        if p.kind == "singular":
            cantor += p.singular_mass
        else:
            ac += float(np.sum(np.abs(np.diff(series.theta(k)))))
    jump = sum(abs(j.right - j.left) for j in series.jumps)
    return BVBreakdown(ac, jump, cantor)


def fd_derivative(y, h):
    """Fourth-order finite-difference derivative on a uniform grid (at least 5 samples)."""
    y = np.asarray(y, dtype=float)
    if len(y) < 5:
        raise ValueError("need at least five samples")
    d = np.empty_like(y)
    d[2:-2] = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * h)
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h)
    d[-1] = (25.0 * y[-1] - 48.0 * y[-2] + 36.0 * y[-3] - 16.0 * y[-4] + 3.0 * y[-5]) / (12.0 * h)
    d[-2] = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3] + 6.0 * y[-4] - y[-5]) / (12.0 * h)
    return d


def _sphere_kappa(seg):
    th, _ = seg.points[:, 0], seg.points[:, 1]
    td, pd = seg.tangent[:, 0], seg.tangent[:, 1]
    tdd, pdd = seg.accel[:, 0], seg.accel[:, 1]
    st, ct = np.sin(th), np.cos(th)
    return st * (pdd * td - tdd * pd) + ct * pd * (st * st * pd * pd + 2.0 * td * td)


def geodesic_curvature(curve, backend="chart-formula"):
    """Geodesic curvature per segment (``None`` for singular segments).

    Backends: ``"chart-formula"`` (local chart expression), ``"sphere-formula"``
    (sphere chart only) and ``"theta-dot"`` (derivative of the transported
    angle by fourth-order finite differences).
    """
    if backend == "chart-formula":
        return chart_curvature(curve)
    if backend == "sphere-formula":
        if getattr(curve.surface, "kind", None) != "sphere":
            raise ValueError("the sphere formula needs the sphere chart")
        return [None if seg.accel is None else _sphere_kappa(seg) for seg in curve.segments]
    if backend == "theta-dot":
        _, series = transport_curve(curve)
        out = []
        for k, seg in enumerate(curve.segments):
            if seg.kind == "singular":
                out.append(None)
                continue
            h = (seg.s[-1] - seg.s[0]) / (len(seg.s) - 1)
            out.append(fd_derivative(series.theta(k), h))
        return out
    raise ValueError(f"unknown backend {backend!r}; valid: chart-formula, sphere-formula, theta-dot")


def transport_identity_check(state, curve):
    """Max over nodes of ``|alpha' beta - alpha beta' - cos(theta) phi'|`` (sphere chart).

    Derivatives of ``alpha`` and ``beta`` are taken by fourth-order finite
    differences on each segment.
    """
    if getattr(curve.surface, "kind", None) != "sphere":
        raise ValueError("the transport identity is stated on the sphere chart")
    worst = 0.0
    for seg in curve.segments:
        a = state.alpha[seg.i0:seg.i1 + 1]
        b = state.beta[seg.i0:seg.i1 + 1]
        h = (seg.s[-1] - seg.s[0]) / (len(seg.s) - 1)
        ad, bd = fd_derivative(a, h), fd_derivative(b, h)
        target = np.cos(seg.points[:, 0]) * seg.tangent[:, 1]
        worst = max(worst, float(np.max(np.abs(ad * b - a * bd - target))))
    return worst


def angle_l1_gap(a, b, grid):
    """``int |a - b|`` over ``grid`` (trapezoid rule on right-continuous samples)."""
    grid = np.asarray(grid, dtype=float)
    return float(np.trapezoid(np.abs(a.sample(grid) - b.sample(grid)), grid))
