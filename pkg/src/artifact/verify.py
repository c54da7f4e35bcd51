"""Golden checks behind the ``verify`` command."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analysis, curve, polygonal, transport
from .surface import Plane, flat_polar_chart, sphere_chart


@dataclass
class Check:
    name: str
    value: float
    expected: float
    tolerance: float
    passed: bool
    relation: str = "abs-diff"

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return (f"{mark}  {self.name:<44} value={self.value:.12g}  expected={self.expected:.12g}"
                f"  tol={self.tolerance:.1e}")


def _near(name, value, expected, tol):
    value = float(value)
    return Check(name, value, float(expected), tol, abs(value - expected) <= tol)


def _below(name, value, tol):
    value = float(value)
    return Check(name, value, 0.0, tol, value <= tol, "at-most")


def _above(name, value, bound):
    value = float(value)
    return Check(name, value, bound, 0.0, value > bound, "greater-than")


def _flag(name, ok):
    return Check(name, float(bool(ok)), 1.0, 0.0, bool(ok), "true")


def octant_vertices():
    """Vertices of the octant triangle rotated so its centroid sits at ``(1, 0, 0)``.

    The rotation keeps the triangle away from both chart poles; the vertices
    are ordered counterclockwise in the polar picture.
    """
    c = np.ones(3) / math.sqrt(3.0)
    e = np.array([1.0, 0.0, 0.0])
    k = np.cross(c, e)
    s = np.linalg.norm(k)
    k = k / s
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    R = np.eye(3) + s * K + (1.0 - float(c @ e)) * K @ K
    out = []
    for v in np.eye(3):
        w = R @ v
        out.append((math.acos(max(-1.0, min(1.0, w[2]))), math.atan2(w[1], w[0])))
    return out


def flat_square(center=(2.0, 0.0), side=0.5):
    """Counterclockwise square on the flat polar chart, given by its polar vertices."""
    cx, cy = center
    h = side / 2.0
    xy = [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
    return [(math.hypot(x, y), math.atan2(y, x)) for x, y in xy]


def random_polygonal_identity(count=20, seed=7, nodes=4096):
    """Max of ``|TC(P) - (kappa(P) + L(P))|`` over seeded random inscribed polygonals."""
    S = sphere_chart()
    src = curve.sample(S, curve.chart_smooth("1.2 + 0.3*sin(3*t)", "t", 0.0, 2.0 * math.pi),
                       nodes)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        k = int(rng.integers(5, 40))
        idx = np.sort(rng.choice(np.arange(1, src.n), k, replace=False))
        poly = polygonal.inscribe(src, None, indices=idx)
        tc = analysis.euclidean_total_curvature(polygonal.as_curve(poly, nodes))
        worst = max(worst, abs(tc - (polygonal.rotation_of(poly) + poly.length)))
    return worst


def golden_checks(nodes=4096, rounds=6):
    """Run every golden check and return a list of :class:`Check`."""
    S = sphere_chart()
    out = []
    for name, th in (("pi/6", math.pi / 6), ("pi/4", math.pi / 4), ("pi/3", math.pi / 3)):
        c = curve.sample(S, curve.parallel(th), nodes)
        rep = analysis.total_intrinsic_curvature(c, rounds=rounds)
        out.append(_near(f"parallel {name}: TC = 2 pi cos", rep.estimate,
                         2 * math.pi * math.cos(th), 1e-3))
        out.append(_below(f"parallel {name}: |TC - F|", rep.equality_gap, 1e-3))
        gb = analysis.gauss_bonnet_check(c)
        out.append(_below(f"cap {name}: Gauss-Bonnet residual", gb.residual, 1e-4))

    oct_curve = curve.sample(S, curve.geodesic_polygon(octant_vertices()), nodes)
    rep = analysis.total_intrinsic_curvature(oct_curve, rounds=rounds)
    out.append(_below("octant polygon: |TC - F|", rep.equality_gap, 1e-6))
    out.append(_near("octant polygon: rotation = 3 pi/2", rep.estimate, 1.5 * math.pi, 1e-6))
    out.append(_below("octant: Gauss-Bonnet residual",
                      analysis.gauss_bonnet_check(oct_curve).residual, 1e-4))
    sq = curve.sample(flat_polar_chart(), curve.geodesic_polygon(flat_square()), 1024)
    out.append(_below("flat square: Gauss-Bonnet residual",
                      analysis.gauss_bonnet_check(sq).residual, 1e-6))

    c = curve.sample(S, curve.parallel(math.pi / 3), nodes)
    state, series = transport.transport_curve(c)
    out.append(_below("transport pi/3: max |Theta - s/sqrt 3|",
                      np.max(np.abs(series.theta(0) - c.s / math.sqrt(3.0))), 1e-6))
    out.append(_below("transport pi/3: norm drift", state.norm_drift(), 1e-9))
    out.append(_below("transport pi/3: identity residual",
                      transport.transport_identity_check(state, c), 1e-7))

    plane = Plane()
    errs = []
    for depth in (5, 6, 7, 8):
        cg = curve.sample(plane, curve.cantor_graph(depth), 64)
        errs.append(abs(analysis.euclidean_total_curvature(cg) - math.pi / 4))
    out.append(_below("Cantor depth 8: |TC - pi/4|", errs[-1], 1e-2))
    out.append(_flag("Cantor: error decreasing over depths 5..8",
                     all(b < a for a, b in zip(errs[:-1], errs[1:]))))
    rep = analysis.total_intrinsic_curvature(cg, rounds=rounds)
    out.append(_below("Cantor depth 8: |TC - F|", rep.equality_gap, 2e-2))

    th = math.pi / 3
    chart, env = analysis.envelope_chart_of_parallel(th, nodes)
    dev = analysis.develop(env)
    out.append(_below("development: radius error",
                      np.max(np.abs(np.linalg.norm(dev.points, axis=1) - math.tan(th))), 1e-6))
    kint = analysis.energy_functional(c).ac
    out.append(_near("development: TC = int |kappa_g|",
                     analysis.euclidean_total_curvature(dev), kint, 1e-4))
    sph8 = polygonal.rotation_of(polygonal.inscribe(c, None, indices=polygonal._uniform(c, 8)))
    flat8 = polygonal.rotation_of(polygonal.inscribe(env, None,
                                                     indices=polygonal._uniform(env, 8)))
    out.append(_above("cross-chart rotation gap at n = 8", abs(sph8 - flat8), 1e-3))
    lim_s = analysis.total_intrinsic_curvature(c, rounds=rounds).estimate
    lim_f = analysis.total_intrinsic_curvature(env, rounds=rounds).estimate
    out.append(_below("cross-chart refinement limits agree", abs(lim_s - lim_f), 2e-3))

    rot = polygonal.refinement_report(
        c, polygonal.refinement_schedule(c, rounds=7)).column("rotation")
    out.append(_flag("sphere parallel: rotation nonincreasing", np.all(np.diff(rot) <= 0)))
    out.append(_above("sphere parallel: min rotation above pi", rot.min(), math.pi))
    rot_f = polygonal.refinement_report(
        env, polygonal.refinement_schedule(env, rounds=7)).column("rotation")
    out.append(_flag("flat chart: rotation nondecreasing", np.all(np.diff(rot_f) >= 0)))

    out.append(_below("sphere polygonals: |TC - (kappa + L)|",
                      random_polygonal_identity(count=20, nodes=nodes), 1e-4))
    return out
