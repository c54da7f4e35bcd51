"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Reference values are closed forms (cap areas, circle radii, 2 pi cos theta)
or frozen numbers from independent computations noted next to them.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from artifact import polygonal as pg
from artifact.analysis import (develop, envelope_chart_of_parallel, euclidean_total_curvature,
                               gauss_bonnet_check, total_intrinsic_curvature)
from artifact.curve import cantor_graph, chart_smooth, geodesic_polygon, parallel, sample
from artifact.surface import Plane, flat_polar_chart, sphere_chart
from artifact.transport import transport_curve, transport_identity_check
from artifact.verify import flat_square, octant_vertices

SPHERE = sphere_chart()
PARALLELS = {"pi/6": math.pi / 6, "pi/4": math.pi / 4, "pi/3": math.pi / 3}
TESTS = Path(__file__).parent


def _report(criterion, name, checks):
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label}={value:.3g}" for label, _, value in checks)
    criterion(name, ok, detail)
    failed = [label for label, passed, _ in checks if not passed]
    assert ok, f"failed: {failed}"


def test_parallel_family_tc(criterion):
    checks = []
    for label, th in PARALLELS.items():
        t0 = time.perf_counter()
        rep = total_intrinsic_curvature(sample(SPHERE, parallel(th), 4096), rounds=6)
        wall = time.perf_counter() - t0
        err = abs(rep.estimate - 2 * math.pi * math.cos(th))
        checks.append((f"err[{label}]", err <= 1e-3, err))
        checks.append((f"wall[{label}]s", wall < 10.0, wall))
    _report(criterion, "parallel family TC -> 2 pi cos(theta0)", checks)


def test_representation_theorem(criterion):
    checks = []
    for label, th in PARALLELS.items():
        gap = total_intrinsic_curvature(sample(SPHERE, parallel(th), 4096)).equality_gap
        checks.append((f"gap[{label}]", gap <= 1e-3, gap))
    polygons = {"octant": (SPHERE, octant_vertices(), 900),
                "triangle": (SPHERE, [(1.0, 0.0), (1.3, 0.2), (1.1, 0.5)], 900),
                "flat-square": (flat_polar_chart(), flat_square(), 1024)}
    for label, (surf, verts, n) in polygons.items():
        gap = total_intrinsic_curvature(sample(surf, geodesic_polygon(verts), n),
                                        rounds=4).equality_gap
        checks.append((f"gap[{label}]", gap <= 1e-6, gap))
    gap = total_intrinsic_curvature(sample(Plane(), cantor_graph(8), 64)).equality_gap
    checks.append(("gap[cantor]", gap <= 2e-2, gap))
    _report(criterion, "representation theorem |TC - F(tau)|", checks)


def test_transport_exactness(criterion):
    c = sample(SPHERE, parallel(math.pi / 3), 4096)
    state, series = transport_curve(c)
    err = float(np.max(np.abs(series.theta(0) - c.s / math.sqrt(3.0))))
    drift = state.norm_drift()
    resid = transport_identity_check(state, c)
    _report(criterion, "transport exactness on the pi/3 parallel",
            [("theta_err", err <= 1e-6, err), ("norm_drift", drift <= 1e-9, drift),
             ("identity", resid <= 1e-7, resid)])


def test_cantor_curve(criterion):
    errs = [abs(euclidean_total_curvature(sample(Plane(), cantor_graph(d), 64)) - math.pi / 4)
            for d in (5, 6, 7, 8)]
    monotone = all(b < a for a, b in zip(errs[:-1], errs[1:]))
    _report(criterion, "Cantor graph Euclidean TC -> pi/4",
            [("err[8]", errs[-1] <= 1e-2, errs[-1]),
             ("decreasing 5..8", monotone, float(monotone))])


def test_gauss_bonnet(criterion):
    checks = []
    for label, th in PARALLELS.items():
        rep = gauss_bonnet_check(sample(SPHERE, parallel(th), 4096))
        area_err = abs(rep.area_integral - 2 * math.pi * (1 - math.cos(th)))
        checks.append((f"residual[{label}]", rep.residual <= 1e-4, rep.residual))
        checks.append((f"area_err[{label}]", area_err <= 1e-4, area_err))
    rep = gauss_bonnet_check(sample(SPHERE, geodesic_polygon(octant_vertices()), 4096))
    checks.append(("residual[octant]", rep.residual <= 1e-4, rep.residual))
    checks.append(("area_err[octant]", abs(rep.area_integral - math.pi / 2) <= 1e-4,
                   abs(rep.area_integral - math.pi / 2)))
    rep = gauss_bonnet_check(sample(flat_polar_chart(), geodesic_polygon(flat_square()), 1024))
    checks.append(("residual[flat-square]", rep.residual <= 1e-6, rep.residual))
    _report(criterion, "Gauss-Bonnet residuals", checks)


def test_development(criterion):
    th = math.pi / 3
    src = sample(SPHERE, parallel(th), 4096)
    _, env = envelope_chart_of_parallel(th, 4096)
    dev = develop(env)
    radius = float(np.max(np.abs(np.linalg.norm(dev.points, axis=1) - math.tan(th))))
    # int |kappa_g| ds = cot(theta0) * 2 pi sin(theta0) = 2 pi cos(theta0)
    kint = 2 * math.pi * math.cos(th)
    tc_err = abs(euclidean_total_curvature(dev) - kint)
    sph8 = pg.rotation_of(pg.inscribe(src, None, indices=pg._uniform(src, 8)))
    flat8 = pg.rotation_of(pg.inscribe(env, None, indices=pg._uniform(env, 8)))
    gap8 = abs(sph8 - flat8)
    lim = abs(total_intrinsic_curvature(src).estimate - total_intrinsic_curvature(env).estimate)
    _report(criterion, "development of the pi/3 parallel",
            [("radius_err", radius <= 1e-6, radius), ("tc_err", tc_err <= 1e-4, tc_err),
             ("rotation_gap[n=8]", gap8 > 1e-3, gap8), ("limit_gap", lim <= 2e-3, lim)])


def test_monotonicity_failure(criterion):
    th = math.pi / 3
    src = sample(SPHERE, parallel(th), 4096)
    _, env = envelope_chart_of_parallel(th, 4096)
    counts = (4, 8, 16, 32, 64, 128, 256)
    rot = np.array([pg.rotation_of(pg.inscribe(src, None, indices=pg._uniform(src, k)))
                    for k in counts])
    flat = np.array([pg.rotation_of(pg.inscribe(env, None, indices=pg._uniform(env, k)))
                     for k in counts])
    _report(criterion, "rotation monotonicity (sphere down, flat up)",
            [("sphere nonincreasing", bool(np.all(np.diff(rot) <= 0)), float(np.max(np.diff(rot)))),
             ("sphere min - pi", rot.min() > math.pi, rot.min() - math.pi),
             ("flat nondecreasing", bool(np.all(np.diff(flat) >= 0)),
              float(np.min(np.diff(flat))))])


def test_sphere_polygonal_identity(criterion):
    src = sample(SPHERE, chart_smooth("1.1 + 0.25*cos(2*t)", "t + 0.1*sin(t)", 0.0,
                                      2 * math.pi), 4096)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(6, 30))
        idx = np.sort(rng.choice(np.arange(1, src.n), k, replace=False))
        poly = pg.inscribe(src, None, indices=idx)
        tc = euclidean_total_curvature(pg.as_curve(poly, 4096))
        worst = max(worst, abs(tc - (pg.rotation_of(poly) + poly.length)))
    _report(criterion, "sphere polygonal TC(P) = kappa(P) + L(P)",
            [("worst", worst <= 1e-4, worst)])


PROPERTY_TESTS = [
    "test_curve.py::test_frame_orthonormal_property",
    "test_curve.py::test_frame_orthonormal_on_sphere_polygon",
    "test_surface.py::test_unit_speed_conservation",
    "test_surface.py::test_christoffel_finite_difference_consistency",
    "test_transport.py::test_parallel_curvature_all_backends",
    "test_transport.py::test_chart_and_sphere_formulas_agree",
    "test_transport.py::test_theta_dot_matches_chart_formula",
    "test_bv.py::test_decompose_cross_check_on_step_functions",
    "test_bv.py::test_decompose_detects_wrong_declared_mass",
    "test_bv.py::test_decompose_cantor",
]


def test_property_suites(criterion):
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"]
                          + [str(TESTS / t) for t in PROPERTY_TESTS],
                          capture_output=True, text=True, cwd=TESTS.parent)
    wall = time.perf_counter() - t0
    _report(criterion, "property suites end to end",
            [("exit", proc.returncode == 0, float(proc.returncode)),
             ("wall_s", wall < 60.0, wall)])
