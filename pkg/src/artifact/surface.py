"""Surfaces described in geodesic polar coordinates.

A chart carries the metric ``ds^2 = dr^2 + g(r, phi) dphi^2``.  The
coefficient ``g`` is given as an expression; its partial derivatives are
obtained symbolically, so the Christoffel symbols

    G^1_22 = -g_r / 2,   G^2_12 = g_r / (2 g),   G^2_22 = g_phi / (2 g)

and the Gauss curvature ``K = -(sqrt g)_rr / sqrt g`` are exact.  The sphere
(``g = sin^2 r``) and the flat plane in polar form (``g = r^2``) also know
their embeddings and closed-form geodesics; other charts fall back to
numerical shooting.

Points are ``(r, phi)`` pairs; tangent vectors are given by their coordinate
components ``(r', phi')``.  :class:`Plane` is a Cartesian stand-in used for
planar curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .expr import parse

TWO_PI = 2.0 * math.pi
POLE_GUARD = 1e-3
G_MIN = 1e-12
SPHERE_INJECTIVITY = 0.9 * math.pi


class ChartDomainError(ValueError):
    """A point lies outside the validity interval of the chart."""


class DegenerateMetricError(ValueError):
    """The metric coefficient is too small to divide by."""


class TruncatedArcError(ValueError):
    """A geodesic left the chart before reaching its requested length."""

    def __init__(self, message, exit_parameter):
        super().__init__(message)
        self.exit_parameter = exit_parameter


class GeodesicConnectionError(RuntimeError):
    """Shooting did not connect two points within its iteration budget."""


class IllConditionedError(ValueError):
    """Two points are too far apart for a unique minimal geodesic."""


@dataclass(frozen=True)
class ChartPoint:
    r: float
    phi: float

    def __iter__(self):
        yield self.r
        yield self.phi

    def as_array(self):
        return np.array([self.r, self.phi])


def _point(p):
    if isinstance(p, ChartPoint):
        return p
    r, phi = p
    return ChartPoint(float(r), float(phi))


def wrap_angle(x):
    """Reduce angles to ``[-pi, pi)``."""
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


@dataclass
class GeodesicArc:
    """A unit-speed geodesic with its sampled trace.

    ``direction`` holds the coordinate components ``(r', phi')`` at the start;
    ``points`` and ``velocities`` are sampled at the parameters ``s``.
    """
    start: ChartPoint
    direction: np.ndarray
    length: float
    s: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    velocities: np.ndarray = field(repr=False)

    @property
    def end(self):
        return ChartPoint(float(self.points[-1, 0]), float(self.points[-1, 1]))

    @property
    def end_direction(self):
        return self.velocities[-1].copy()


class PolarChart:
    """Geodesic polar chart with metric coefficient ``g(r, phi)``.

    Parameters
    ----------
    expression : str
        ``g`` in the expression grammar (variables ``r`` and ``phi``).
    kind : {"sphere", "flat", "custom"}
        Selects closed-form geodesics and embeddings for the first two.
    r_range : tuple
        Validity interval of ``r``.  Evaluation requires ``lo < r < hi``.
    """

    def __init__(self, expression, name=None, kind="custom", r_range=(0.0, math.inf),
                 pole_guard=POLE_GUARD):
        self.expression = expression
        self.name = name or f"custom-polar[{expression}]"
        self.kind = kind
        self.r_range = (float(r_range[0]), float(r_range[1]))
        self.pole_guard = pole_guard
        e = parse(expression, ("r", "phi"))
        er, ep = e.diff("r"), e.diff("phi")
        err = er.diff("r")
        names = ("r", "phi")
        self.g = e.compile(names)
        self.g_r = er.compile(names)
        self.g_phi = ep.compile(names)
        self.g_rr = err.compile(names)
        src = f"lambda r, phi: ({e.code('math')}, {er.code('math')}, {ep.code('math')})"
        self._jet = eval(compile(src, "<chart>", "eval"), {"math": math})
        self.derivative_expressions = {"g_r": str(er), "g_phi": str(ep), "g_rr": str(err)}

    def __repr__(self):
        return f"PolarChart({self.name!r})"

    @property
    def analytic(self):
        return self.kind in ("sphere", "flat")

    @property
    def has_embedding(self):
        return self.analytic

    # -- pointwise fields ---------------------------------------------------
    def in_domain(self, r):
        lo, hi = self.r_range
        r = np.asarray(r)
        return (r > lo) & (r < hi)

    def check_domain(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise ChartDomainError("non-finite chart coordinates")
        bad = ~self.in_domain(pts[:, 0])
        if np.any(bad):
            r = pts[np.argmax(bad), 0]
            raise ChartDomainError(f"r = {r:.6g} outside the chart interval {self.r_range}")

    def guard(self, points, what="curve point"):
        """Reject points closer than ``pole_guard`` to a degenerate chart edge."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self.check_domain(pts)
        lo, hi = self.r_range
        r = pts[:, 0]
        near = r < lo + self.pole_guard
        if math.isfinite(hi):
            near |= r > hi - self.pole_guard
        if np.any(near):
            raise ChartDomainError(
                f"{what} at r = {r[np.argmax(near)]:.6g} is within {self.pole_guard} "
                f"of the chart pole")

    def metric(self, points):
        pts = np.atleast_2d(points)
        return np.asarray(self.g(pts[:, 0], pts[:, 1]), dtype=float)

    def sqrt_g(self, r, phi):
        return np.sqrt(np.asarray(self.g(r, phi), dtype=float))

    def gauss_curvature(self, r, phi):
        g = np.asarray(self.g(r, phi), dtype=float)
        gr = np.asarray(self.g_r(r, phi), dtype=float)
        grr = np.asarray(self.g_rr(r, phi), dtype=float)
        return gr * gr / (4.0 * g * g) - grr / (2.0 * g)

    def orthonormal(self, points, vecs):
        """Components of tangent vectors in the frame ``(e_r, e_phi / sqrt g)``."""
        pts = np.atleast_2d(points)
        v = np.atleast_2d(vecs)
        sg = np.sqrt(self.metric(pts))
        return np.stack([v[:, 0], sg * v[:, 1]], axis=-1)

    def from_orthonormal(self, points, comps):
        pts = np.atleast_2d(points)
        c = np.atleast_2d(comps)
        sg = np.sqrt(self.metric(pts))
        return np.stack([c[:, 0], c[:, 1] / sg], axis=-1)

    def frame_rate(self, points, vel):
        """Rotation rate of the orthonormal frame along a curve: ``(sqrt g)_r phi'``."""
        pts = np.atleast_2d(points)
        v = np.atleast_2d(vel)
        g = self.metric(pts)
        gr = np.asarray(self.g_r(pts[:, 0], pts[:, 1]), dtype=float)
        return gr / (2.0 * np.sqrt(g)) * v[:, 1]

    def geodesic_acceleration(self, points, vel):
        """Second derivatives ``(r'', phi'')`` of unit-speed geodesics."""
        pts = np.atleast_2d(points)
        v = np.atleast_2d(vel)
        g = self.metric(pts)
        gr = np.asarray(self.g_r(pts[:, 0], pts[:, 1]), dtype=float)
        gp = np.asarray(self.g_phi(pts[:, 0], pts[:, 1]), dtype=float)
        rd, pd = v[:, 0], v[:, 1]
        rdd = 0.5 * gr * pd * pd
        pdd = -(2.0 * gr * rd * pd + gp * pd * pd) / (2.0 * g)
        return np.stack([rdd, pdd], axis=-1)

    def same_point(self, p, q, tol=1e-8):
        dr = p[0] - q[0]
        dphi = float(wrap_angle(p[1] - q[1]))
        g = float(self.metric(np.array([p]))[0]) if self.in_domain(p[0]) else 0.0
        return math.hypot(dr, math.sqrt(max(g, 0.0)) * dphi) <= tol

    # -- embeddings ---------------------------------------------------------
    def embed(self, points):
        pts = np.atleast_2d(points)
        r, phi = pts[:, 0], pts[:, 1]
        if self.kind == "sphere":
            return np.stack([np.sin(r) * np.cos(phi), np.sin(r) * np.sin(phi), np.cos(r)], -1)
        if self.kind == "flat":
            return np.stack([r * np.cos(phi), r * np.sin(phi)], -1)
        raise ValueError(f"chart {self.name!r} has no embedding")

    def embed_jet(self, points):
        """Embedding with first and second partials: rho, rho_r, rho_phi, rho_rr, rho_rphi, rho_phiphi."""
        pts = np.atleast_2d(points)
        r, phi = pts[:, 0], pts[:, 1]
        c, s = np.cos(phi), np.sin(phi)
        z = np.zeros_like(r)
        if self.kind == "sphere":
            sr, cr = np.sin(r), np.cos(r)
            rho = np.stack([sr * c, sr * s, cr], -1)
            rho_r = np.stack([cr * c, cr * s, -sr], -1)
            rho_p = np.stack([-sr * s, sr * c, z], -1)
            rho_rr = -rho
            rho_rp = np.stack([-cr * s, cr * c, z], -1)
            rho_pp = np.stack([-sr * c, -sr * s, z], -1)
            return rho, rho_r, rho_p, rho_rr, rho_rp, rho_pp
        if self.kind == "flat":
            rho = np.stack([r * c, r * s], -1)
            rho_r = np.stack([c, s], -1)
            rho_p = np.stack([-r * s, r * c], -1)
            rho_rr = np.zeros_like(rho)
            rho_rp = np.stack([-s, c], -1)
            rho_pp = -rho
            return rho, rho_r, rho_p, rho_rr, rho_rp, rho_pp
        raise ValueError(f"chart {self.name!r} has no embedding")

    def normal(self, points):
        if self.kind != "sphere":
            raise ValueError("surface normal in R^3 is only available on the sphere")
        return self.embed(points)

    def embed_vectors(self, points, vecs):
        _, rho_r, rho_p, *_ = self.embed_jet(points)
        v = np.atleast_2d(vecs)
        return rho_r * v[:, :1] + rho_p * v[:, 1:2]

    def _from_embedded(self, X, V, phi_ref):
        """Chart points and velocities from embedded positions and velocities."""
        X = np.atleast_2d(X)
        V = np.atleast_2d(V)
        if self.kind == "sphere":
            rho = np.hypot(X[:, 0], X[:, 1])
            r = np.arctan2(rho, X[:, 2])
            phi = np.arctan2(X[:, 1], X[:, 0])
            e_r = np.stack([X[:, 2] * X[:, 0] / rho, X[:, 2] * X[:, 1] / rho, -rho], -1)
            e_p = np.stack([-X[:, 1] / rho, X[:, 0] / rho, np.zeros_like(rho)], -1)
            rd = np.sum(V * e_r, -1)
            pd = np.sum(V * e_p, -1) / np.sin(r)
        else:
            r = np.hypot(X[:, 0], X[:, 1])
            phi = np.arctan2(X[:, 1], X[:, 0])
            e_r = X / r[:, None]
            e_p = np.stack([-e_r[:, 1], e_r[:, 0]], -1)
            rd = np.sum(V * e_r, -1)
            pd = np.sum(V * e_p, -1) / r
        phi = np.unwrap(phi)
        phi = phi + (phi_ref + wrap_angle(phi[0] - phi_ref) - phi[0])
        return np.stack([r, phi], -1), np.stack([rd, pd], -1)

    # -- geodesics ----------------------------------------------------------
    def _geodesic_embedded(self, start, direction, s):
        p = np.array([start])
        x = self.embed(p)[0]
        t = self.embed_vectors(p, np.array([direction]))[0]
        t = t / np.linalg.norm(t)
        s = np.asarray(s, dtype=float)[:, None]
        if self.kind == "sphere":
            X = np.cos(s) * x + np.sin(s) * t
            V = -np.sin(s) * x + np.cos(s) * t
        else:
            X = x + s * t
            V = np.broadcast_to(t, X.shape)
        return self._from_embedded(X, V, start[1])

    def geodesic_trace(self, start, direction, length, count):
        """Points and velocities at ``count + 1`` evenly spaced parameters."""
        s = np.linspace(0.0, length, count + 1)
        if self.analytic:
            pts, vel = self._geodesic_embedded(tuple(start), direction, s)
        else:
            arc = _shoot(self, _point(start), np.asarray(direction, float), length, count)
            pts, vel = arc.points, arc.velocities
        return s, pts, vel

    def connect_many(self, P, Q):
        """Minimal geodesics between rows of ``P`` and ``Q``.

        Returns start directions, lengths and end directions (coordinate
        components).  Zero-length pairs get NaN directions.
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if not self.analytic:
            out = [geodesic_connect(self, p, q) for p, q in zip(P, Q)]
            d0 = np.array([a.direction for a in out]).reshape(-1, 2)
            d1 = np.array([a.end_direction for a in out]).reshape(-1, 2)
            return d0, np.array([a.length for a in out]), d1
        x, y = self.embed(P), self.embed(Q)
        if self.kind == "sphere":
            dot = np.sum(x * y, -1)
            crs = np.linalg.norm(np.cross(x, y), axis=-1)
            ell = np.arctan2(crs, dot)
            far = ell >= SPHERE_INJECTIVITY
            if np.any(far):
                i = int(np.argmax(far))
                raise IllConditionedError(
                    f"points {P[i]} and {Q[i]} are {ell[i]:.6g} apart; "
                    f"connection requires distance below {SPHERE_INJECTIVITY:.6g}")
            with np.errstate(invalid="ignore", divide="ignore"):
                t = (y - dot[:, None] * x) / crs[:, None]
            t1 = -np.sin(ell)[:, None] * x + np.cos(ell)[:, None] * t
        else:
            diff = y - x
            ell = np.linalg.norm(diff, axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                t = diff / ell[:, None]
            t1 = t
        d0 = self._chart_velocity(P, t)
        d1 = self._chart_velocity(Q, t1)
        return d0, ell, d1

    def _chart_velocity(self, P, V):
        _, rho_r, rho_p, *_ = self.embed_jet(P)
        if self.kind == "sphere":
            rd = np.sum(V * rho_r, -1)
            pd = np.sum(V * rho_p, -1) / np.sin(P[:, 0]) ** 2
        else:
            rd = np.sum(V * rho_r, -1)
            pd = np.sum(V * rho_p, -1) / P[:, 0] ** 2
        return np.stack([rd, pd], -1)

    def distance_many(self, P, Q):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if self.analytic:
            return self.distance_embedded(self.embed(P), self.embed(Q))
        return np.array([geodesic_connect(self, p, q).length for p, q in zip(P, Q)])

    def distance_embedded(self, x, y):
        if self.kind == "sphere":
            return np.arctan2(np.linalg.norm(np.cross(x, y), axis=-1), np.sum(x * y, -1))
        return np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)


class Plane:
    """Euclidean plane in Cartesian coordinates ``(x, y)``."""

    kind = "plane"
    name = "plane"
    analytic = True
    has_embedding = True

    def __repr__(self):
        return "Plane()"

    def check_domain(self, points):
        if not np.all(np.isfinite(points)):
            raise ChartDomainError("non-finite coordinates")

    def guard(self, points, what="curve point"):
        self.check_domain(points)

    def metric(self, points):
        return np.ones(len(np.atleast_2d(points)))

    def gauss_curvature(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def orthonormal(self, points, vecs):
        return np.atleast_2d(np.asarray(vecs, dtype=float))

    def from_orthonormal(self, points, comps):
        return np.atleast_2d(np.asarray(comps, dtype=float))

    def frame_rate(self, points, vel):
        return np.zeros(len(np.atleast_2d(vel)))

    def geodesic_acceleration(self, points, vel):
        return np.zeros_like(np.atleast_2d(vel), dtype=float)

    def same_point(self, p, q, tol=1e-8):
        return math.hypot(p[0] - q[0], p[1] - q[1]) <= tol

    def embed(self, points):
        return np.atleast_2d(np.asarray(points, dtype=float))

    def embed_jet(self, points):
        pts = np.atleast_2d(points)
        n = len(pts)
        ex = np.tile([1.0, 0.0], (n, 1))
        ey = np.tile([0.0, 1.0], (n, 1))
        z = np.zeros((n, 2))
        return pts, ex, ey, z, z, z

    def embed_vectors(self, points, vecs):
        return np.atleast_2d(np.asarray(vecs, dtype=float))

    def geodesic_trace(self, start, direction, length, count):
        s = np.linspace(0.0, length, count + 1)
        d = np.asarray(direction, dtype=float)
        pts = np.asarray(start, dtype=float) + s[:, None] * d
        return s, pts, np.broadcast_to(d, pts.shape).copy()

    def connect_many(self, P, Q):
        diff = np.atleast_2d(Q) - np.atleast_2d(P)
        ell = np.linalg.norm(diff, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = diff / ell[:, None]
        return t, ell, t.copy()

    def distance_many(self, P, Q):
        return np.linalg.norm(np.atleast_2d(Q) - np.atleast_2d(P), axis=-1)

    def distance_embedded(self, x, y):
        return np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)


def sphere_chart():
    """Unit sphere, ``r`` the colatitude: ``g = sin^2 r``."""
    return PolarChart("sin(r)^2", name="sphere", kind="sphere", r_range=(0.0, math.pi))


def flat_polar_chart():
    """Euclidean plane in polar coordinates: ``g = r^2``."""
    return PolarChart("r^2", name="flat-polar", kind="flat")


def hyperbolic_chart():
    """Constant curvature -1 in geodesic polar form: ``g = sinh^2 r``."""
    return PolarChart("sinh(r)^2", name="hyperbolic-polar", kind="custom")


def custom_polar_chart(expression, r_max=math.inf, name=None):
    return PolarChart(expression, name=name, kind="custom", r_range=(0.0, r_max))


# -- pointwise operations -------------------------------------------------

def metric_at(chart, p):
    """Metric coefficient ``g`` at a chart point."""
    p = _point(p)
    chart.check_domain([p.r, p.phi])
    return float(chart.g(p.r, p.phi))


def _nondegenerate(chart, p):
    chart.check_domain([p.r, p.phi])
    g = float(chart.g(p.r, p.phi))
    if g < G_MIN:
        raise DegenerateMetricError(f"g = {g:.3g} at r = {p.r:.6g} is below {G_MIN}")
    return g


def christoffel_at(chart, p):
    """Return ``(G^1_22, G^2_12, G^2_22)`` at ``p``."""
    p = _point(p)
    g = _nondegenerate(chart, p)
    gr = float(chart.g_r(p.r, p.phi))
    gp = float(chart.g_phi(p.r, p.phi))
    return -0.5 * gr, gr / (2.0 * g), gp / (2.0 * g)


def gauss_curvature_at(chart, p):
    p = _point(p)
    _nondegenerate(chart, p)
    return float(chart.gauss_curvature(p.r, p.phi))


# -- geodesic shooting ------------------------------------------------------

def _rk4(chart, state, h, nsteps, lo, hi, record=True, s0=0.0):
    """Fixed-step RK4 for the geodesic equations in ``(r, phi, r', phi')``."""
    jet = chart._jet

    def acc(r, phi, rd, pd):
        g, gr, gp = jet(r, phi)
        rdd = 0.5 * gr * pd * pd
        if pd == 0.0:
            return rdd, 0.0
        return rdd, -(2.0 * gr * rd * pd + gp * pd * pd) / (2.0 * g)

    r, phi, rd, pd = (float(v) for v in state)
    edge_lo, edge_hi = lo, hi
    lo, hi = lo - 1e-9, hi + 1e-9
    out = np.empty((nsteps + 1, 4)) if record else None
    if record:
        out[0] = r, phi, rd, pd
    hh = 0.5 * h
    try:
        for i in range(nsteps):
            r_prev = r
            a1, b1 = acc(r, phi, rd, pd)
            r2, p2, rd2, pd2 = r + hh * rd, phi + hh * pd, rd + hh * a1, pd + hh * b1
            a2, b2 = acc(r2, p2, rd2, pd2)
            r3, p3, rd3, pd3 = r + hh * rd2, phi + hh * pd2, rd + hh * a2, pd + hh * b2
            a3, b3 = acc(r3, p3, rd3, pd3)
            r4, p4, rd4, pd4 = r + h * rd3, phi + h * pd3, rd + h * a3, pd + h * b3
            a4, b4 = acc(r4, p4, rd4, pd4)
            r += h / 6.0 * (rd + 2.0 * rd2 + 2.0 * rd3 + rd4)
            phi += h / 6.0 * (pd + 2.0 * pd2 + 2.0 * pd3 + pd4)
            rd += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            pd += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            if not (lo <= r <= hi) or not math.isfinite(r):
                # locate the crossing by linear interpolation within the step
                frac = 1.0
                if math.isfinite(r) and r != r_prev:
                    bound = edge_lo if r < lo else edge_hi
                    frac = min(1.0, max(0.0, (r_prev - bound) / (r_prev - r)))
                exit_s = s0 + (i + frac) * h
                raise TruncatedArcError(f"geodesic left the chart at parameter {exit_s:.6g}",
                                        exit_s)
            if record:
                out[i + 1] = r, phi, rd, pd
    except ZeroDivisionError:
        raise DegenerateMetricError("metric vanished along the geodesic") from None
    return out if record else np.array([r, phi, rd, pd])


def _shoot(chart, start, direction, length, nsteps):
    lo, hi = chart.r_range
    h = length / nsteps if nsteps else 0.0
    y = _rk4(chart, (start.r, start.phi, direction[0], direction[1]), h, nsteps, lo, hi)
    s = np.linspace(0.0, length, nsteps + 1)
    return GeodesicArc(start, np.array(direction, dtype=float), float(length), s,
                       y[:, :2].copy(), y[:, 2:].copy())


def speed_defect(chart, points, velocities):
    """``|r'^2 + g phi'^2 - 1|`` per sample."""
    g = chart.metric(points)
    v = np.atleast_2d(velocities)
    return np.abs(v[:, 0] ** 2 + g * v[:, 1] ** 2 - 1.0)


def geodesic_shoot(chart, start, direction, length, step=None):
    """Integrate the geodesic from ``start`` with unit initial ``direction``.

    Uses classical RK4 with a fixed step (default ``length / 1024``).
    Raises :class:`TruncatedArcError` if the arc leaves the chart.
    """
    start = _point(start)
    chart.check_domain([start.r, start.phi])
    direction = np.asarray(direction, dtype=float)
    if float(speed_defect(chart, [start.r, start.phi], direction)[0]) > 1e-8:
        raise ValueError("initial direction is not a unit vector for the chart metric")
    if length < 0:
        raise ValueError("length must be nonnegative")
    if length == 0:
        return _shoot(chart, start, direction, 0.0, 0)
    nsteps = 1024 if step is None else max(1, int(math.ceil(length / step - 1e-12)))
    return _shoot(chart, start, direction, length, nsteps)


def _chart_gap(chart, a, q):
    g = float(chart.g(a[0], a[1]))
    sg = math.sqrt(max(g, 0.0))
    return q[0] - a[0], sg * float(wrap_angle(q[1] - a[1])), sg


def _shoot_connect(chart, p, q, nsteps=1024, max_eval=200):
    lo, hi = chart.r_range
    dr = q.r - p.r
    dphi = float(wrap_angle(q.phi - p.phi))
    gm = float(chart.g(0.5 * (p.r + q.r), p.phi + 0.5 * dphi))
    ell0 = math.hypot(dr, math.sqrt(max(gm, 0.0)) * dphi)
    if ell0 == 0.0:
        return _shoot(chart, p, np.array([1.0, 0.0]), 0.0, 0)
    psi0 = math.atan2(math.sqrt(max(gm, 0.0)) * dphi, dr)
    if chart.r_range[0] == 0.0:
        # near the pole the polar picture (r cos phi, r sin phi) is the better first guess
        D = (q.r * math.cos(dphi) - p.r, q.r * math.sin(dphi))
        psi0 = math.atan2(D[1], D[0])
        ell0 = math.hypot(*D)
    sgp = math.sqrt(float(chart.g(p.r, p.phi)))
    state = {"ell": ell0, "evals": 0}

    def direction(psi):
        return math.cos(psi), math.sin(psi) / sgp

    def miss(psi):
        state["evals"] += 1
        if state["evals"] > max_eval:
            raise GeodesicConnectionError("shooting exceeded its evaluation budget")
        ell = state["ell"]
        d = direction(psi)
        y = _rk4(chart, (p.r, p.phi, d[0], d[1]), ell / nsteps, nsteps, lo, hi, record=False)
        h = ell / nsteps
        for _ in range(30):
            a, b, sg = _chart_gap(chart, y, (q.r, q.phi))
            vr, vp = y[2], sg * y[3]
            along = a * vr + b * vp
            if abs(along) <= 1e-15 * max(1.0, ell):
                break
            along = max(along, -0.5 * ell)
            m = max(1, int(math.ceil(abs(along) / h)))
            y = _rk4(chart, y, along / m, m, lo, hi, record=False)
            ell += along
        state["ell"] = ell
        return vr * b - vp * a

    c0 = miss(psi0)
    if abs(c0) <= 1e-14 * max(1.0, ell0):
        psi = psi0
    else:
        delta = 0.02
        while True:
            other = psi0 + delta if c0 > 0 else psi0 - delta
            c1 = miss(other)
            if c1 == 0.0 or (c1 > 0) != (c0 > 0):
                break
            delta *= 2.0
            if delta > math.pi:
                raise GeodesicConnectionError(
                    f"could not bracket the shooting direction from {p} to {q}")
        # miss carries its length estimate between calls, so pin the bracket values
        known = {psi0: c0, other: c1}
        a, b = sorted((psi0, other))
        psi = brentq(lambda x: known[x] if x in known else miss(x), a, b, xtol=1e-11,
                     maxiter=100)
        # secant polish
        x0, x1 = psi, psi + 1e-9
        f0, f1 = miss(x0), miss(x1)
        for _ in range(6):
            if f1 == f0 or abs(f1) < 1e-15:
                break
            x0, x1, f0 = x1, x1 - f1 * (x1 - x0) / (f1 - f0), f1
            f1 = miss(x1)
        psi = x1 if abs(f1) <= abs(f0) else x0
        miss(psi)
    ell = state["ell"]
    arc = _shoot(chart, p, np.array(direction(psi)), ell, nsteps)
    a, b, _ = _chart_gap(chart, arc.points[-1], (q.r, q.phi))
    if math.hypot(a, b) > 1e-8:
        raise GeodesicConnectionError(
            f"shooting from {p} missed {q} by {math.hypot(a, b):.3g}")
    return arc


def geodesic_connect(chart, p, q, method="auto", samples=64):
    """Minimal geodesic from ``p`` to ``q``.

    ``method`` is ``"analytic"`` (sphere and flat charts), ``"shooting"``
    (any chart) or ``"auto"``.
    """
    p, q = _point(p), _point(q)
    if isinstance(chart, Plane):
        d, ell, _ = chart.connect_many([tuple(p)], [tuple(q)])
        s, pts, vel = chart.geodesic_trace(tuple(p), d[0], ell[0], samples)
        return GeodesicArc(p, d[0], float(ell[0]), s, pts, vel)
    chart.check_domain([[p.r, p.phi], [q.r, q.phi]])
    if method == "auto":
        method = "analytic" if chart.analytic else "shooting"
    if method == "analytic":
        if not chart.analytic:
            raise ValueError(f"no closed-form geodesics on chart {chart.name!r}")
        d, ell, _ = chart.connect_many([tuple(p)], [tuple(q)])
        if ell[0] == 0.0:
            return GeodesicArc(p, np.array([1.0, 0.0]), 0.0, np.zeros(1),
                               np.array([[p.r, p.phi]]), np.array([[1.0, 0.0]]))
        s, pts, vel = chart.geodesic_trace(tuple(p), d[0], float(ell[0]), samples)
        return GeodesicArc(p, d[0], float(ell[0]), s, pts, vel)
    if method != "shooting":
        raise ValueError(f"unknown connection method {method!r}")
    if chart.kind == "sphere":
        d = float(chart.distance_many([tuple(p)], [tuple(q)])[0])
        if d >= SPHERE_INJECTIVITY:
            raise IllConditionedError(
                f"points are {d:.6g} apart; connection requires distance below "
                f"{SPHERE_INJECTIVITY:.6g}")
    return _shoot_connect(chart, p, q)


def geodesic_distance(chart, p, q, method="auto"):
    """Length of the minimal geodesic between two points."""
    p, q = _point(p), _point(q)
    if method == "auto" and chart.analytic:
        if not isinstance(chart, Plane):
            chart.check_domain([[p.r, p.phi], [q.r, q.phi]])
        d = float(chart.distance_many([tuple(p)], [tuple(q)])[0])
        if chart.kind == "sphere" and d >= SPHERE_INJECTIVITY:
            raise IllConditionedError(f"points are {d:.6g} apart")
        return d
    return geodesic_connect(chart, p, q, method=method).length


def make_surface(spec):
    """Build a surface from a descriptor such as ``{"type": "sphere"}``."""
    kind = spec.get("type")
    if kind == "sphere":
        return sphere_chart()
    if kind == "flat-polar":
        return flat_polar_chart()
    if kind == "plane":
        return Plane()
    if kind == "custom-polar":
        if "g" not in spec:
            raise ValueError("custom-polar surface needs an expression field 'g'")
        return custom_polar_chart(spec["g"], r_max=float(spec.get("r_max", math.inf)))
    raise ValueError(
        f"unknown surface type {kind!r}; valid types: sphere, flat-polar, custom-polar, plane")
