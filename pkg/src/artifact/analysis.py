"""Total curvature estimation, Gauss-Bonnet residuals and planar development."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bv import BVBreakdown, energy_functional
from .curve import JumpRecord, SampledCurve, Segment, arc_length_param, chart_smooth
from .polygonal import (RefinementReport, polyline_rotation, refinement_report,
                        refinement_schedule)
from .surface import Plane, flat_polar_chart
from .transport import transport_curve

TWO_PI = 2.0 * math.pi
EXACT_TOL = 1e-12


class NonConvergenceError(RuntimeError):
    """Refinement rows oscillate instead of settling."""


class OrientationError(ValueError):
    """A boundary curve is negatively oriented."""


class SelfIntersectionError(ValueError):
    """A boundary curve crosses itself."""


@dataclass
class Extrapolation:
    estimate: float
    exponent: float | None
    status: str  # exact, extrapolated, low-confidence, oscillating, too-few-rows


def extrapolate(x, y, min_exponent=0.5):
    """Limit of ``y`` as ``x -> 0`` assuming ``y ~ T + C x^p`` on the last three rows.

    Returns the plain last value with status ``low-confidence`` when the fitted
    exponent is below ``min_exponent`` or cannot be fitted, and with status
    ``oscillating`` when the last differences change sign.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        return Extrapolation(float(y[-1]), None, "too-few-rows")
    (x1, x2, x3), (y1, y2, y3) = x[-3:], y[-3:]
    d1, d2 = y1 - y2, y2 - y3
    scale = max(1.0, abs(y3))
    if max(abs(d1), abs(d2)) <= EXACT_TOL * scale:
        return Extrapolation(float(y3), None, "exact")
    if d1 * d2 <= 0.0:
        if abs(d2) <= EXACT_TOL * scale:
            return Extrapolation(float(y3), None, "exact")
        return Extrapolation(float(y3), None, "oscillating")
    if not (x1 > x2 > x3 > 0.0):
        return Extrapolation(float(y3), None, "low-confidence")
    ratio = d1 / d2

    def h(p):
        return (x1 ** p - x2 ** p) / (x2 ** p - x3 ** p) - ratio

    lo, hi = 0.05, 8.0
    if h(lo) * h(hi) > 0.0:
        return Extrapolation(float(y3), None, "low-confidence")
    p = brentq(h, lo, hi, xtol=1e-12)
    if p < min_exponent:
        return Extrapolation(float(y3), float(p), "low-confidence")
    c = d2 / (x2 ** p - x3 ** p)
    return Extrapolation(float(y3 - c * x3 ** p), float(p), "extrapolated")


# ---------------------------------------------------------------------------
# total intrinsic curvature

@dataclass
class TCReport:
    refinement: RefinementReport
    estimate: float
    energy: BVBreakdown
    equality_gap: float
    status: str = "extrapolated"
    exponent: float | None = None

    def plot_data(self):
        return list(zip(self.refinement.column("modulus"), self.refinement.column("rotation")))

    def as_dict(self):
        return {"estimate": self.estimate, "status": self.status, "exponent": self.exponent,
                "equality_gap": self.equality_gap, "energy": self.energy.as_dict(),
                "refinement": self.refinement.as_dict()}


def total_intrinsic_curvature(curve, strategy="uniform-doubling", rounds=6, start=None,
                              targets=None, seed=0, partitions=None):
    """Estimate TC_M by inscribed polygonals with vanishing modulus.

    The rotation is extrapolated in the modulus over the last three rows and
    compared with the energy functional of the tantrix.
    """
    if partitions is None:
        partitions = refinement_schedule(curve, strategy, start=start, rounds=rounds,
                                         targets=targets, seed=seed)
    report = refinement_report(curve, partitions, strategy,
                               seed if strategy == "random-nested" else None)
    ext = extrapolate(report.column("modulus"), report.column("rotation"))
    if ext.status == "oscillating":
        warnings.warn("rotation rows oscillate; reporting the last row", RuntimeWarning)
    energy = energy_functional(curve)
    return TCReport(report, ext.estimate, energy, abs(ext.estimate - energy.total), ext.status,
                    ext.exponent)


# ---------------------------------------------------------------------------
# Euclidean total curvature

def _segment_chords(seg, k, top, least=256):
    """Points and parameters of one segment on a grid ``k`` times coarser than its nodes.

    Smooth and geodesic segments are resampled exactly on uniform grids with
    at least ``least`` intervals at the coarsest level, so that every level
    halves the spacing of the previous one and short pieces are resolved.
    """
    m = seg.i1 - seg.i0
    if seg.kind == "singular" or seg.sampler is None or (m % top == 0 and m >= least * top):
        idx = np.unique(np.r_[np.arange(0, m + 1, k), m])
        return seg.s[idx], seg.points[idx]
    s, pts, _, _ = seg.refined(max(least, m // top) * (top // k))
    return s, pts


def euclidean_tc_rows(curve, strides=(8, 4, 2, 1)):
    """Chord-polyline rotations ``(mesh, rotation)`` of the embedded curve at several spacings.

    Each piece is subdivided on its own uniform grid, so piece junctions are
    always vertices.
    """
    surf = curve.surface
    if not (isinstance(surf, Plane) or surf.has_embedding):
        raise ValueError("surface has no embedding")
    top = max(strides)
    if any(top % k for k in strides):
        raise ValueError("strides must divide the largest stride")
    rows = []
    for k in strides:
        s_all, p_all = [], []
        for j, seg in enumerate(curve.segments):
            s, pts = _segment_chords(seg, k, top)
            s_all.append(s if j == 0 else s[1:])
            p_all.append(pts if j == 0 else pts[1:])
        s_all, p_all = np.concatenate(s_all), np.concatenate(p_all)
        X = surf.embed(p_all)
        pts = X[:-1] if curve.closed else X
        rows.append((float(np.max(np.diff(s_all))), polyline_rotation(pts, curve.closed)))
    return rows


def romberg(values, powers=(1, 2, 3)):
    """Eliminate ``h^p`` error terms from values on successively halved spacings."""
    v = [float(x) for x in values]
    for p in powers:
        if len(v) < 2:
            break
        f = 2.0 ** p
        v = [(f * b - a) / (f - 1.0) for a, b in zip(v[:-1], v[1:])]
    return v[-1]


def euclidean_total_curvature(curve, detail=False):
    """Euclidean total curvature of the embedded curve, as a limit of chord rotations.

    Chord rotations on halved spacings have an error expansion in integer
    powers of the spacing (odd powers come from corners), so the limit is
    taken by Romberg elimination of ``h, h^2, h^3``.  With singular pieces
    the finest row (all nodes) is returned as the best lower estimate.
    """
    rows = euclidean_tc_rows(curve)
    rot = np.array([r[1] for r in rows])
    if any(seg.kind == "singular" for seg in curve.segments):
        ext = Extrapolation(float(rot[-1]), None, "finest-row")
    elif np.ptp(rot) <= EXACT_TOL * max(1.0, abs(rot[-1])):
        ext = Extrapolation(float(rot[-1]), None, "exact")
    else:
        ext = Extrapolation(romberg(rot), None, "extrapolated")
    return ext if detail else ext.estimate


# ---------------------------------------------------------------------------
# Gauss-Bonnet

@dataclass
class GaussBonnetReport:
    area_integral: float
    theta_span: float
    alpha: float
    residual: float = field(init=False)

    def __post_init__(self):
        self.residual = abs(self.area_integral - (TWO_PI - self.theta_span - self.alpha))

    def as_dict(self):
        return asdict(self)


def _polar_picture(curve):
    r, phi = curve.points[:, 0], curve.points[:, 1]
    return np.stack([r * np.cos(phi), r * np.sin(phi)], -1)


def _segments_cross(A, B, C, D):
    """Proper intersection test for segment arrays ``AB`` (rows) against ``CD`` (columns)."""
    def orient(P, Q, R):
        return (Q[..., 0] - P[..., 0]) * (R[..., 1] - P[..., 1]) - \
               (Q[..., 1] - P[..., 1]) * (R[..., 0] - P[..., 0])
    A, B = A[:, None], B[:, None]
    C, D = C[None], D[None]
    o1, o2 = orient(A, B, C), orient(A, B, D)
    o3, o4 = orient(C, D, A), orient(C, D, B)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def _check_simple(X, samples=512):
    k = len(X) - 1
    idx = np.unique(np.r_[np.round(np.linspace(0, k, min(samples, k) + 1)).astype(int)])
    P = X[idx]
    A, B = P[:-1], P[1:]
    hit = _segments_cross(A, B, A, B)
    m = len(A)
    i, j = np.nonzero(np.triu(hit, 2))
    keep = ~((i == 0) & (j == m - 1))
    if np.any(keep):
        raise SelfIntersectionError(
            f"boundary crosses itself between nodes {idx[i[keep][0]]} and {idx[j[keep][0]]}")


def _radial_weights(surface, phi, a, b, order=16):
    """``int_a^b K sqrt(g) dr`` at fixed ``phi`` (vectorized over rows)."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    r = mid[:, None] + half[:, None] * x[None, :]
    p = np.broadcast_to(phi[:, None], r.shape)
    g = surface.g(r, p)
    integrand = surface.gauss_curvature(r, p) * np.sqrt(g)
    return half * np.sum(integrand * w[None, :], axis=1)


def _ray_integral(surface, X, psi, w0, R=None):
    """``int w(r, psi) K sqrt(g) dr`` along the ray at angle ``psi`` of the polar picture.

    Crossing radii are interpolated from the node radii ``R`` when given
    (exact for arcs of constant ``r``), else read off the polar chord.
    """
    A, B = X[:-1], X[1:]
    d = np.array([math.cos(psi), math.sin(psi)])
    cA = d[0] * A[:, 1] - d[1] * A[:, 0]
    cB = d[0] * B[:, 1] - d[1] * B[:, 0]
    hit = ((cA < 0) & (cB >= 0)) | ((cB < 0) & (cA >= 0))
    if not np.any(hit):
        return 0.0, w0
    t = cA[hit] / (cA[hit] - cB[hit])
    P = A[hit] + t[:, None] * (B[hit] - A[hit])
    rho = P @ d
    if R is not None:
        rho = np.where(rho > 0, R[:-1][hit] + t * (R[1:][hit] - R[:-1][hit]), rho)
    sign = np.sign(cB[hit] - cA[hit])
    front = rho > 0
    rho, sign = rho[front], sign[front]
    order = np.argsort(rho)
    rho, sign = rho[order], sign[order]
    winding = w0 - np.concatenate([[0.0], np.cumsum(sign)])
    if winding[-1] != 0:
        raise ValueError("enclosed region reaches the chart boundary")
    if np.any(winding < 0):
        raise OrientationError("boundary is negatively oriented (clockwise in the chart)")
    if np.any(winding > 1):
        raise SelfIntersectionError("boundary winds more than once")
    lo = np.r_[0.0, rho[:-1]]
    mask = winding[:-1] != 0
    if not np.any(mask):
        return 0.0, winding
    vals = _radial_weights(surface, np.full(int(mask.sum()), psi), lo[mask], rho[mask])
    return float(np.sum(winding[:-1][mask] * vals)), winding


def _phi_breaks(phi, curve):
    dphi = np.diff(phi)
    turn = np.flatnonzero(dphi[:-1] * dphi[1:] < 0) + 1
    corners = [j.index for j in curve.all_jumps()]
    return phi[np.unique(np.r_[turn, corners, 0]).astype(int)]


def enclosed_curvature_integral(curve, nodes=512):
    """``int_U K dA`` over the region enclosed by a closed chart curve.

    Rays from the chart pole are intersected with the boundary polyline in
    the polar picture ``(r cos phi, r sin phi)``; the winding number of each
    radial interval weights a Gauss-Legendre integral of ``K sqrt(g)`` in ``r``.
    The angular integral is Gauss-Legendre on subintervals split at corners
    and at turning points of ``phi``.
    """
    surf = curve.surface
    if isinstance(surf, Plane):
        return 0.0
    if not curve.closed:
        raise ValueError("Gauss-Bonnet needs a closed curve")
    X = _polar_picture(curve)
    X[-1] = X[0]
    R = curve.points[:, 0].copy()
    R[-1] = R[0]
    _check_simple(X)
    phi = curve.points[:, 1]
    w0 = int(round((phi[-1] - phi[0]) / TWO_PI))
    if w0 < 0:
        raise OrientationError("boundary is negatively oriented (clockwise in the chart)")
    if w0 > 1:
        raise SelfIntersectionError("boundary winds around the pole more than once")
    lo = float(np.min(phi))
    span = min(TWO_PI, float(np.max(phi)) - lo) if w0 == 0 else TWO_PI
    breaks = (_phi_breaks(phi, curve) - lo) % TWO_PI
    breaks = np.unique(np.r_[0.0, breaks[breaks < span], span])
    breaks = breaks[np.r_[True, np.diff(breaks) > 1e-12]]
    widths = np.diff(breaks)
    per = np.maximum(8, np.round(nodes * widths / span).astype(int))
    total = 0.0
    for a, b, k in zip(breaks[:-1], breaks[1:], per):
        x, w = np.polynomial.legendre.leggauss(int(k))
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for xi, wi in zip(x, w):
            val, _ = _ray_integral(surf, X, lo + mid + half * xi, w0, R)
            total += half * wi * val
    return total


def gauss_bonnet_check(curve, nodes=512):
    """Residual of ``int_U K dA = 2 pi - (Theta(L-) - Theta(0+)) - alpha`` for a closed simple curve.

    ``Theta`` is the transported angle (interior corner jumps included) and
    ``alpha`` the signed turn at the closing junction.  Positive orientation
    is counterclockwise in the polar picture of the chart.
    """
    if not curve.closed:
        raise ValueError("Gauss-Bonnet needs a closed curve")
    area = enclosed_curvature_integral(curve, nodes)
    _, series = transport_curve(curve)
    alpha = curve.junction.angle if curve.junction is not None else 0.0
    return GaussBonnetReport(float(area), series.span(), float(alpha))


# ---------------------------------------------------------------------------
# development

def _polar_to_plane(pts, vec, acc=None):
    r, phi = pts[:, 0], pts[:, 1]
    c, s = np.cos(phi), np.sin(phi)
    rd, pd = vec[:, 0], vec[:, 1]
    v = np.stack([rd * c - r * s * pd, rd * s + r * c * pd], -1)
    if acc is None:
        return v
    rdd, pdd = acc[:, 0], acc[:, 1]
    ax = rdd * c - 2.0 * rd * s * pd - r * c * pd ** 2 - r * s * pdd
    ay = rdd * s + 2.0 * rd * c * pd - r * s * pd ** 2 + r * c * pdd
    return v, np.stack([ax, ay], -1)


def develop(curve):
    """Planar development of a curve on a flat polar chart: ``r (cos phi, sin phi)``.

    Arc length, corner angles and geodesic curvature are preserved.
    """
    surf = curve.surface
    if isinstance(surf, Plane):
        return curve
    K = surf.gauss_curvature(curve.points[:, 0], curve.points[:, 1])
    if np.max(np.abs(K)) > 1e-9:
        raise ValueError(f"chart is not flat along the curve (max |K| = {np.max(np.abs(K)):.3g})")
    plane = Plane()
    segs = []
    for seg in curve.segments:
        if seg.kind == "singular":
            raise ValueError("singular pieces cannot be developed")
        tan, acc = _polar_to_plane(seg.points, seg.tangent, seg.accel)
        pts = _polar_picture_points(seg.points)
        segs.append(Segment(seg.kind, seg.i0, seg.i1, seg.s, pts, tan, acc, None, 0.0, 0.0))

    def jump(j):
        p = curve.points[j.index][None]
        left = _polar_to_plane(p, j.left[None])[0]
        right = _polar_to_plane(p, j.right[None])[0]
        return JumpRecord(j.index, j.s, left, right, j.angle)

    junction = jump(curve.junction) if curve.junction is not None else None
    return SampledCurve(plane, curve.s.copy(), _polar_picture_points(curve.points), segs,
                        [jump(j) for j in curve.jumps], curve.closed, junction)


def _polar_picture_points(pts):
    return np.stack([pts[:, 0] * np.cos(pts[:, 1]), pts[:, 0] * np.sin(pts[:, 1])], -1)


def envelope_chart_of_parallel(colatitude, n=4096):
    """Flat chart of the tangent-plane envelope along a parallel, with the parallel re-expressed.

    On that chart the parallel is ``r = tan(theta0)``, ``phi = cot(theta0) s``
    for ``s`` in ``[0, 2 pi sin(theta0)]``.  Returns ``(chart, curve)``.
    """
    th = float(colatitude)
    if not 0.0 < th <= math.pi / 2:
        raise ValueError(f"colatitude {th} must lie in (0, pi/2]")
    if math.isclose(th, math.pi / 2, abs_tol=1e-12):
        raise ValueError("the equator is a geodesic: its envelope is a cylinder and its "
                         "development is a straight line")
    chart = flat_polar_chart()
    curve = arc_length_param(chart, chart_smooth(repr(math.tan(th)), "t", 0.0,
                                                 TWO_PI * math.cos(th)), n=n, closed=False)
    return chart, curve
