"""Curves on a surface, sampled uniformly in arc length.

A curve is a chain of pieces:

* :class:`SmoothPiece`: closed-form coordinate functions of a parameter ``t``;
* :class:`GeodesicPiece`: the minimal geodesic between two points;
* :class:`CantorPiece`: the planar graph of the integral of the
  Cantor-Vitali function, known at the triadic nodes of a given depth.

:func:`arc_length_param` turns a chain into a :class:`SampledCurve`.  Each
piece becomes a :class:`Segment` that owns its one-sided tangents; corners
between pieces are kept as :class:`JumpRecord` entries with both one-sided
tangents.  No single tangent is ever assigned to a corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import parse
from .surface import Plane, wrap_angle

JUMP_THRESHOLD = 1e-9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


class CurveGapError(ValueError):
    """Consecutive pieces do not meet."""

    def __init__(self, message, location):
        super().__init__(message)
        self.location = location


# ---------------------------------------------------------------------------
# pieces

class SmoothPiece:
    """Coordinates ``(c1(t), c2(t))`` given as expressions in ``t``.

    On a polar chart the coordinates are ``(r, phi)``; on the plane they are
    ``(x, y)``.
    """

    kind = "smooth"

    def __init__(self, first, second, t0, t1, variable="t"):
        if not t1 > t0:
            raise ValueError(f"parameter interval [{t0}, {t1}] is empty")
        self.source = (first, second)
        self.t0, self.t1 = float(t0), float(t1)
        self._fns = []
        for text in (first, second):
            e = parse(text, (variable,))
            d1 = e.diff(variable)
            d2 = d1.diff(variable)
            self._fns.append(tuple(x.compile((variable,)) for x in (e, d1, d2)))

    def jet(self, t):
        t = np.asarray(t, dtype=float)
        c = np.empty((t.size, 3, 2))
        for j, fns in enumerate(self._fns):
            for k, f in enumerate(fns):
                c[:, k, j] = np.broadcast_to(f(t), t.shape)
        return c[:, 0], c[:, 1], c[:, 2]

    def prepare(self, surface):
        return _SmoothSampler(self, surface)


class GeodesicPiece:
    """Minimal geodesic from ``start`` to ``end``."""

    kind = "geodesic"

    def __init__(self, start, end):
        self.start = tuple(float(x) for x in start)
        self.end = tuple(float(x) for x in end)

    def prepare(self, surface):
        return _GeodesicSampler(self, surface)


class CantorPiece:
    """Graph ``(t, int_0^t v)`` of the Cantor-Vitali function ``v`` on ``[0, 1]``.

    At triadic depth ``k`` the values of ``v`` and of its integral are exact at
    the ``3^k + 1`` nodes ``j / 3^k``; the tangent there is ``(1, v) / sqrt(1 + v^2)``.
    """

    kind = "singular"

    def __init__(self, depth, origin=(0.0, 0.0)):
        depth = int(depth)
        if depth < 1 or depth > 14:
            raise ValueError("Cantor depth must be between 1 and 14")
        self.depth = depth
        self.origin = tuple(float(x) for x in origin)

    def prepare(self, surface):
        if not isinstance(surface, Plane):
            raise ValueError("Cantor pieces are planar; use the plane surface")
        return _CantorSampler(self)


def cantor_values(depth):
    """Cantor-Vitali function at ``j / 3^depth``, ``j = 0..3^depth`` (exact)."""
    n = 3 ** depth
    j = np.arange(n + 1)
    digits = []
    rest = j.copy()
    for _ in range(depth):
        digits.append(rest % 3)
        rest //= 3
    v = np.zeros(n + 1)
    stopped = np.zeros(n + 1, dtype=bool)
    for i, d in enumerate(reversed(digits)):
        v = np.where(stopped, v, v + (d > 0) * 0.5 ** (i + 1))
        stopped |= d == 1
    v[-1] = 1.0
    return v


def _linear_arclength(dt, va, vb):
    """Exact ``int sqrt(1 + v^2)`` over an interval where ``v`` is linear."""
    dv = vb - va
    F = lambda v: 0.5 * (v * np.sqrt(1.0 + v * v) + np.arcsinh(v))
    flat = np.abs(dv) < 1e-14
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(flat, dt * np.sqrt(1.0 + va * va), dt / dv * (F(vb) - F(va)))
    return out


# ---------------------------------------------------------------------------
# samplers: per-piece arc-length machinery

class _SmoothSampler:
    def __init__(self, piece, surface):
        self.piece, self.surface = piece, surface
        m = 4096
        self.tk = np.linspace(piece.t0, piece.t1, m + 1)
        h = np.diff(self.tk)
        tq = self.tk[:-1, None] + 0.5 * h[:, None] * (_GL_X + 1.0)
        sig = self.speed(tq.ravel()).reshape(tq.shape)
        seg = 0.5 * h * (sig @ _GL_W)
        self.Sk = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.Sk[-1])

    def speed(self, t):
        c, d1, _ = self.piece.jet(t)
        g = self.surface.metric(c)
        return np.sqrt(d1[:, 0] ** 2 + g * d1[:, 1] ** 2)

    def _S(self, t, k):
        a = self.tk[k]
        h = t - a
        tq = a[:, None] + 0.5 * h[:, None] * (_GL_X + 1.0)
        sig = self.speed(tq.ravel()).reshape(tq.shape)
        return self.Sk[k] + 0.5 * h * (sig @ _GL_W)

    def invert(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        k = np.clip(np.searchsorted(self.Sk, s, side="right") - 1, 0, len(self.tk) - 2)
        frac = (s - self.Sk[k]) / (self.Sk[k + 1] - self.Sk[k])
        t = self.tk[k] + frac * (self.tk[k + 1] - self.tk[k])
        for _ in range(3):
            t = t - (self._S(t, k) - s) / self.speed(t)
            t = np.clip(t, self.tk[k], self.tk[k + 1])
        t[s <= 0.0] = self.piece.t0
        t[s >= self.length] = self.piece.t1
        return t

    def evaluate(self, s):
        t = self.invert(s)
        c, d1, d2 = self.piece.jet(t)
        surf = self.surface
        g = surf.metric(c)
        gr = np.asarray(_field(surf, "g_r", c), dtype=float)
        gp = np.asarray(_field(surf, "g_phi", c), dtype=float)
        sig = np.sqrt(d1[:, 0] ** 2 + g * d1[:, 1] ** 2)
        sig_dot = (d1[:, 0] * d2[:, 0]
                   + 0.5 * (gr * d1[:, 0] + gp * d1[:, 1]) * d1[:, 1] ** 2
                   + g * d1[:, 1] * d2[:, 1]) / sig
        tangent = d1 / sig[:, None]
        accel = (d2 * sig[:, None] - d1 * sig_dot[:, None]) / sig[:, None] ** 3
        return c, tangent, accel

    def uniform(self, count):
        s = np.linspace(0.0, self.length, count + 1)
        return (s,) + self.evaluate(s)


class _GeodesicSampler:
    def __init__(self, piece, surface):
        self.piece, self.surface = piece, surface
        d, ell, _ = surface.connect_many([piece.start], [piece.end])
        self.length = float(ell[0])
        if not self.length > 0:
            raise ValueError(f"geodesic piece from {piece.start} to {piece.end} has zero length")
        self.direction = d[0]

    def uniform(self, count):
        s, pts, vel = self.surface.geodesic_trace(self.piece.start, self.direction,
                                                  self.length, count)
        pts = pts.copy()
        pts[-1] = _nearest_branch(self.piece.end, pts[-1], self.surface)
        acc = self.surface.geodesic_acceleration(pts, vel)
        return s, pts, vel, acc


class _CantorSampler:
    def __init__(self, piece):
        self.piece = piece
        k = piece.depth
        n = 3 ** k
        t = np.linspace(0.0, 1.0, n + 1)
        v = cantor_values(k)
        dt = np.diff(t)
        y = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * dt)])
        ds = _linear_arclength(dt, v[:-1], v[1:])
        self.s = np.concatenate([[0.0], np.cumsum(ds)])
        self.length = float(self.s[-1])
        self.v = v
        self.points = np.stack([t, y], -1) + np.asarray(piece.origin)
        self.tangent = np.stack([np.ones_like(v), v], -1) / np.sqrt(1.0 + v * v)[:, None]
        self.mass = float(np.arctan(v[-1]) - np.arctan(v[0]))


def _field(surface, name, pts):
    if isinstance(surface, Plane):
        return np.ones(len(pts)) if name == "g" else np.zeros(len(pts))
    return getattr(surface, name)(pts[:, 0], pts[:, 1])


def _nearest_branch(target, p, surface):
    """Return ``target`` with its angle moved to the branch nearest ``p``."""
    target = np.array(target, dtype=float)
    if isinstance(surface, Plane):
        return target
    target[1] = p[1] + float(wrap_angle(target[1] - p[1]))
    return target


# ---------------------------------------------------------------------------
# sampled curve

@dataclass
class Segment:
    """Samples of one piece on the global node range ``i0..i1`` (inclusive)."""
    kind: str
    i0: int
    i1: int
    s: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    tangent: np.ndarray = field(repr=False)
    accel: np.ndarray | None = field(repr=False, default=None)
    sampler: object = field(repr=False, default=None)
    singular_mass: float = 0.0
    phi_shift: float = 0.0

    def refined(self, count):
        """Evaluate on ``count`` uniform intervals of the segment (smooth and geodesic)."""
        if self.kind == "singular":
            raise ValueError("singular segments have only their native nodes")
        s, pts, tan, acc = self.sampler.uniform(count)
        if self.phi_shift:
            pts = pts.copy()
            pts[:, 1] += self.phi_shift
        return self.s[0] + s, pts, tan, acc


@dataclass
class JumpRecord:
    """A corner: one-sided unit tangents (coordinate components) and their signed angle."""
    index: int
    s: float
    left: np.ndarray
    right: np.ndarray
    angle: float


@dataclass
class SampledCurve:
    surface: object
    s: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    segments: list
    jumps: list
    closed: bool
    junction: JumpRecord | None = None

    @property
    def length(self):
        return float(self.s[-1])

    @property
    def n(self):
        return len(self.s) - 1

    @property
    def breakpoints(self):
        """Node indices where pieces meet (always includes both ends)."""
        idx = {0, self.n}
        idx.update(seg.i0 for seg in self.segments)
        return sorted(idx)

    @property
    def is_smooth(self):
        return not self.jumps and all(seg.kind != "singular" for seg in self.segments) and (
            self.junction is None)

    def tangent_nodes(self):
        """Unit tangents per node: right limits at interior corners, left limit at the end."""
        out = np.empty_like(self.points)
        for seg in self.segments:
            out[seg.i0:seg.i1 + 1] = seg.tangent
        for seg in self.segments:
            out[seg.i0] = seg.tangent[0]
        out[-1] = self.segments[-1].tangent[-1]
        return out

    def all_jumps(self):
        """Corner records, with the closing junction (if any) last."""
        return list(self.jumps) + ([self.junction] if self.junction is not None else [])


def signed_turn(surface, point, left, right):
    """Signed angle from ``left`` to ``right`` (increasing ``phi`` is positive)."""
    a = surface.orthonormal(np.atleast_2d(point), np.atleast_2d(left))
    b = surface.orthonormal(np.atleast_2d(point), np.atleast_2d(right))
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    ang = np.arctan2(cross, dot)
    return float(ang[0]) if np.ndim(point) == 1 else ang


def _allocate(lengths, n):
    total = sum(lengths)
    counts = [max(1, int(round(n * ell / total))) for ell in lengths]
    counts[int(np.argmax(lengths))] += n - sum(counts)
    if min(counts) < 1:
        raise ValueError("too few nodes for the number of pieces")
    return counts


def arc_length_param(surface, pieces, n=4096, closed=None, gap_tol=1e-8):
    """Sample a chain of pieces at (piecewise) uniform arc-length nodes.

    Smooth and geodesic pieces share ``n`` intervals in proportion to their
    lengths; a Cantor piece keeps its ``3^depth`` native intervals.
    """
    if n < 64:
        raise ValueError("n must be at least 64")
    pieces = list(pieces)
    if not pieces:
        raise ValueError("a curve needs at least one piece")
    samplers = [p.prepare(surface) for p in pieces]
    regular = [k for k, p in enumerate(pieces) if p.kind != "singular"]
    counts = {}
    if regular:
        alloc = _allocate([samplers[k].length for k in regular], n)
        counts = dict(zip(regular, alloc))

    seg_data = []
    for k, (piece, smp) in enumerate(zip(pieces, samplers)):
        if piece.kind == "singular":
            seg_data.append(("singular", smp.s, smp.points, smp.tangent, None, smp, smp.mass))
        else:
            s, pts, tan, acc = smp.uniform(counts[k])
            seg_data.append((piece.kind, s, pts, tan, acc, smp, 0.0))

    s_all, p_all, segments, jumps = [], [], [], []
    offset, index = 0.0, 0
    for k, (kind, s, pts, tan, acc, smp, mass) in enumerate(seg_data):
        pts = pts.copy()
        shift = 0.0
        if k > 0:
            prev = p_all[-1][-1]
            if not surface.same_point(prev, pts[0], gap_tol):
                raise CurveGapError(
                    f"piece {k} starts at {tuple(pts[0])} but piece {k - 1} ends at "
                    f"{tuple(prev)} (s = {offset:.6g})", offset)
            if not isinstance(surface, Plane):
                shift = prev[1] - pts[0, 1]
                pts[:, 1] += shift
        gs = offset + s
        segments.append(Segment(kind, index, index + len(s) - 1, gs, pts, tan, acc, smp, mass,
                                shift))
        if k == 0:
            s_all.append(gs)
            p_all.append(pts)
        else:
            s_all.append(gs[1:])
            p_all.append(pts[1:])
            left = seg_data[k - 1][3][-1]
            right = tan[0]
            ang = signed_turn(surface, pts[0], left, right)
            if abs(ang) > JUMP_THRESHOLD:
                jumps.append(JumpRecord(index, offset, left.copy(), right.copy(), ang))
        offset = gs[-1]
        index += len(s) - 1

    s_all = np.concatenate(s_all)
    p_all = np.concatenate(p_all)
    surface.guard(p_all)
    if closed is None:
        closed = surface.same_point(p_all[0], p_all[-1], gap_tol)
    elif closed and not surface.same_point(p_all[0], p_all[-1], gap_tol):
        raise CurveGapError("curve declared closed but its ends differ", float(s_all[-1]))
    junction = None
    if closed:
        left = segments[-1].tangent[-1]
        right = segments[0].tangent[0]
        ang = signed_turn(surface, p_all[0], left, right)
        if abs(ang) > JUMP_THRESHOLD:
            junction = JumpRecord(0, 0.0, left.copy(), right.copy(), ang)
    return SampledCurve(surface, s_all, p_all, segments, jumps, bool(closed), junction)


# ---------------------------------------------------------------------------
# generators

def parallel(colatitude):
    """Parallel of constant colatitude on the sphere chart, traversed with increasing phi."""
    th = float(colatitude)
    if not 0.0 < th < math.pi:
        raise ValueError(f"colatitude {th} must lie strictly between 0 and pi")
    return [SmoothPiece(repr(th), "t", 0.0, 2.0 * math.pi)]


def geodesic_polygon(vertices, closed=True):
    """Geodesic pieces joining consecutive vertices (and the last to the first if closed)."""
    v = [tuple(float(x) for x in p) for p in vertices]
    if len(v) < 2:
        raise ValueError("a geodesic polygon needs at least two vertices")
    if closed and v[0] == v[-1]:
        v = v[:-1]
    if closed and len(v) < 3:
        raise ValueError("a closed geodesic polygon needs at least three vertices")
    chain = v + [v[0]] if closed else v
    return [GeodesicPiece(a, b) for a, b in zip(chain[:-1], chain[1:])]


def chart_smooth(r, phi, t0, t1):
    return [SmoothPiece(r, phi, t0, t1)]


def cantor_graph(depth):
    return [CantorPiece(depth)]


def sample(surface, pieces, n=4096, closed=None):
    return arc_length_param(surface, pieces, n=n, closed=closed)


# ---------------------------------------------------------------------------
# tantrix and frames

def tantrix_of(curve, embedded=True):
    """Tantrix as a BV series.

    With ``embedded`` (sphere, flat chart, plane) the values are unit vectors
    in the ambient Euclidean space and smooth pieces carry the derivative
    ``tau'``.  Otherwise values are orthonormal-frame components.  Corner
    jumps keep both one-sided limits; a closed curve's junction is recorded
    once, at ``s = L``.
    """
    from .bv import BVPiece, BVSeries, Jump

    surf = curve.surface
    pieces = []
    for seg in curve.segments:
        if embedded:
            vals, deriv = _embedded_tangent(surf, seg.points, seg.tangent, seg.accel)
        else:
            vals, deriv = surf.orthonormal(seg.points, seg.tangent), None
        kind = "singular" if seg.kind == "singular" else "ac"
        pieces.append(BVPiece(seg.s, vals, deriv, kind,
                              seg.singular_mass if kind == "singular" else 0.0))
    jumps = []
    for k in range(1, len(pieces)):
        left, right = pieces[k - 1].values[-1], pieces[k].values[0]
        if _angle_between(left, right) > JUMP_THRESHOLD:
            jumps.append(Jump(float(pieces[k].s[0]), left, right))
    if curve.junction is not None:
        jumps.append(Jump(curve.length, pieces[-1].values[-1], pieces[0].values[0]))
    return BVSeries(pieces, jumps)


def _angle_between(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.size == 3:
        return float(np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b))
    return float(abs(np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)))


def _embedded_tangent(surface, pts, tangent, accel):
    rho, rr, rp, rrr, rrp, rpp = surface.embed_jet(pts)
    a, b = tangent[:, :1], tangent[:, 1:2]
    tau = rr * a + rp * b
    if accel is None:
        return tau, None
    ad, bd = accel[:, :1], accel[:, 1:2]
    dtau = rrr * a * a + 2.0 * rrp * a * b + rpp * b * b + rr * ad + rp * bd
    return tau, dtau


@dataclass
class FrameSample:
    """Darboux frames ``(t, n, u)`` along one segment, one row per node."""
    t: np.ndarray
    n: np.ndarray
    u: np.ndarray


def darboux_frame(curve):
    """Frames per segment; corner nodes appear in both adjacent segments.

    On the sphere the frame lives in R^3 with ``u = n x t``.  Elsewhere it is
    built from the orthonormal chart frame: ``t = (a, b, 0)``,
    ``n = (0, 0, 1)`` and ``u = (-b, a, 0)``, which is the intrinsic conormal
    ``(-sqrt(g) phi', r' / sqrt(g))``.
    """
    surf = curve.surface
    out = []
    for seg in curve.segments:
        if getattr(surf, "kind", None) == "sphere":
            t = surf.embed_vectors(seg.points, seg.tangent)
            n = surf.normal(seg.points)
            u = np.cross(n, t)
        else:
            c = surf.orthonormal(seg.points, seg.tangent)
            z = np.zeros(len(c))
            t = np.stack([c[:, 0], c[:, 1], z], -1)
            n = np.tile([0.0, 0.0, 1.0], (len(c), 1))
            u = np.stack([-c[:, 1], c[:, 0], z], -1)
        out.append(FrameSample(t, n, u))
    return out


def conormal(surface, points, tangent):
    """Intrinsic unit conormal in coordinate components."""
    c = surface.orthonormal(points, tangent)
    return surface.from_orthonormal(points, np.stack([-c[:, 1], c[:, 0]], -1))


def chart_curvature(curve):
    """Geodesic curvature per segment from the local chart expression.

    ``k_g = sqrt(g) [ (r' phi'' - phi' r'') + (g_r phi'^3 + 2 (g_r / g) r'^2 phi'
    + (g_phi / g) r' phi'^2) / 2 ]``; singular segments yield ``None``.
    """
    surf = curve.surface
    out = []
    for seg in curve.segments:
        if seg.accel is None:
            out.append(None)
            continue
        out.append(_chart_kappa(surf, seg.points, seg.tangent, seg.accel))
    return out


def _chart_kappa(surf, pts, tan, acc):
    g = _field(surf, "g", pts) if isinstance(surf, Plane) else surf.metric(pts)
    gr = np.asarray(_field(surf, "g_r", pts), dtype=float)
    gp = np.asarray(_field(surf, "g_phi", pts), dtype=float)
    rd, pd = tan[:, 0], tan[:, 1]
    rdd, pdd = acc[:, 0], acc[:, 1]
    return np.sqrt(g) * ((rd * pdd - pd * rdd)
                         + 0.5 * (gr * pd ** 3 + 2.0 * gr / g * rd * rd * pd
                                  + gp / g * rd * pd * pd))
