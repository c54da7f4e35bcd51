import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import polygonal
from artifact.curve import (GeodesicPiece, chart_smooth, geodesic_polygon, parallel, sample)
from artifact.surface import (Plane, custom_polar_chart, flat_polar_chart, hyperbolic_chart,
                              sphere_chart)
from artifact.transport import (AnglePiece, AngleSeries, TransportState, angle_l1_gap,
                                fd_derivative, geodesic_curvature, optimal_lift,
                                transport_curve, transport_identity_check, transport_polygonal,
                                transport_smooth)
from artifact.verify import octant_vertices

SPHERE = sphere_chart()
PARALLELS = [math.pi / 6, math.pi / 4, math.pi / 3]


@pytest.fixture(scope="module")
def par60():
    return sample(SPHERE, parallel(math.pi / 3), 4096)


@pytest.fixture(scope="module")
def octant():
    return sample(SPHERE, geodesic_polygon(octant_vertices()), 900)


# transport_smooth

def test_parallel_angle_is_linear(par60):
    state, series = transport_smooth(par60)
    assert np.max(np.abs(series.theta(0) - par60.s / math.sqrt(3.0))) <= 1e-6
    assert state.norm_drift() <= 1e-9


def test_great_circle_keeps_its_tangent():
    c = sample(SPHERE, parallel(math.pi / 2), 1024)
    _, series = transport_smooth(c)
    assert np.max(np.abs(series.theta(0))) <= 1e-12


@pytest.mark.parametrize("backend", ["chart", "christoffel"])
def test_chart_backends_match_sphere_backend(par60, backend):
    _, a = transport_curve(par60, backend="sphere")
    _, b = transport_curve(par60, backend=backend)
    assert np.max(np.abs(a.theta(0) - b.theta(0))) <= 1e-9


def test_rotation_and_christoffel_backends_agree_on_custom_chart():
    chart = custom_polar_chart("sinh(r)^2 + r^2")
    c = sample(chart, chart_smooth("1.0 + 0.3*sin(2*t)", "t + 0.2*cos(t)", 0.0, 2 * math.pi),
               2048)
    sa, a = transport_curve(c, backend="chart")
    sb, b = transport_curve(c, backend="christoffel")
    assert np.max(np.abs(sa.alpha - sb.alpha)) <= 1e-9
    assert np.max(np.abs(a.theta(0) - b.theta(0))) <= 1e-9


def test_sphere_backend_needs_sphere():
    c = sample(flat_polar_chart(), chart_smooth("1.0", "t", 0.0, 1.0), 128)
    with pytest.raises(ValueError):
        transport_curve(c, backend="sphere")


def test_rejects_non_unit_initial_vector(par60):
    with pytest.raises(ValueError):
        transport_curve(par60, X0=(0.0, 3.0))


def test_initial_angle_from_given_vector(par60):
    # X0 = e_theta = -u(0), and X = cos(Theta) tau - sin(Theta) u gives Theta(0) = pi/2
    _, series = transport_curve(par60, X0=(1.0, 0.0))
    assert series.theta(0)[0] == pytest.approx(math.pi / 2)


def test_transport_smooth_rejects_corners(octant):
    with pytest.raises(ValueError):
        transport_smooth(octant)


@settings(max_examples=15, deadline=None)
@given(chart=st.sampled_from(["sphere", "flat", "hyperbolic", "custom"]),
       a=st.floats(0.0, 0.3), k=st.integers(1, 3))
def test_norm_preserved(chart, a, k):
    surf = {"sphere": SPHERE, "flat": flat_polar_chart(), "hyperbolic": hyperbolic_chart(),
            "custom": custom_polar_chart("sinh(r)^2 + r^2")}[chart]
    c = sample(surf, chart_smooth(f"1.0 + {a!r}*sin({k}*t)", "t", 0.0, 2 * math.pi), 512)
    state, _ = transport_curve(c)
    assert state.norm_drift() <= 1e-9


def test_flat_chart_transport_is_constant_in_the_plane():
    # a parallel field on the flat chart is constant in Cartesian terms
    flat = flat_polar_chart()
    c = sample(flat, chart_smooth("2.0 + 0.5*cos(t)", "t", 0.0, 3.0), 1024)
    state, _ = transport_curve(c)
    phi = c.points[:, 1]
    ex = state.alpha * np.cos(phi) - state.beta * np.sin(phi)
    ey = state.alpha * np.sin(phi) + state.beta * np.cos(phi)
    assert np.ptp(ex) <= 1e-9 and np.ptp(ey) <= 1e-9


# transport_polygonal

def test_single_arc_is_constant():
    c = sample(SPHERE, [GeodesicPiece((1.0, 0.0), (1.3, 0.6))], 128)
    poly = polygonal.inscribe(c, None, indices=[0, c.n])
    series = transport_polygonal(poly)
    assert series.jumps == []
    assert len(series.pieces) == 1 and np.ptp(series.theta(0)) == 0.0


def test_polygonal_variation_equals_rotation(par60):
    poly = polygonal.inscribe(par60, None, indices=polygonal._uniform(par60, 12))
    series = optimal_lift(transport_polygonal(poly))
    assert series.variation() == pytest.approx(polygonal.rotation_of(poly), abs=1e-12)


def test_octant_signed_turning(octant):
    poly = polygonal.inscribe(octant, None, indices=[0, 300, 600])
    series = transport_polygonal(poly)
    total = sum(j.right - j.left for j in series.jumps)
    assert total == pytest.approx(1.5 * math.pi, abs=1e-9)


def test_polygonal_angle_matches_curve_transport_on_octant(octant):
    _, series = transport_curve(octant)
    assert series.span() + octant.junction.angle == pytest.approx(1.5 * math.pi, abs=1e-9)


# optimal_lift

def _two_piece(jump):
    s1, s2 = np.array([0.0, 1.0]), np.array([1.0, 2.0])
    return AngleSeries([AnglePiece(s1, np.array([0.0, 0.0])),
                        AnglePiece(s2, np.array([jump, jump]))], [0, 0])


def test_lift_three_halves_pi():
    lifted = optimal_lift(_two_piece(1.5 * math.pi))
    j = lifted.jumps[0]
    assert j.right - j.left == pytest.approx(-0.5 * math.pi)


def test_lift_small_jump_unchanged():
    lifted = optimal_lift(_two_piece(math.pi / 3))
    assert lifted.jumps[0].right - lifted.jumps[0].left == pytest.approx(math.pi / 3)


def test_lift_full_turn_removes_jump():
    assert optimal_lift(_two_piece(2 * math.pi)).jumps == []


def test_lift_exact_pi_is_positive():
    lifted = optimal_lift(_two_piece(math.pi))
    assert lifted.jumps[0].right - lifted.jumps[0].left == math.pi
    lifted = optimal_lift(_two_piece(-math.pi))
    assert lifted.jumps[0].right - lifted.jumps[0].left == math.pi


def test_lift_closing_jump():
    series = AngleSeries([AnglePiece(np.array([0.0, 1.0]), np.zeros(2))], [0], 2 * math.pi)
    assert optimal_lift(series).closing is None
    series.closing = -1.5 * math.pi
    assert optimal_lift(series).closing == pytest.approx(0.5 * math.pi)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20.0, 20.0), min_size=1, max_size=6))
def test_lift_bounds_jumps_and_keeps_directions(jumps):
    pieces = []
    level = 0.0
    for k, j in enumerate([0.0] + jumps):
        level += j
        pieces.append(AnglePiece(np.array([k, k + 1.0]), np.array([level, level + 0.1])))
    series = AngleSeries(pieces, [0] * len(pieces))
    lifted = optimal_lift(series)
    for j in lifted.jumps:
        assert -math.pi - 1e-9 < j.right - j.left <= math.pi + 1e-9
    for (c0, s0), (c1, s1) in zip(series.direction(), lifted.direction()):
        assert np.array_equal(c0, c1) and np.array_equal(s0, s1)
    for k in range(len(pieces)):
        th0, th1 = series.theta(k), lifted.theta(k)
        np.testing.assert_allclose(np.cos(th0), np.cos(th1), atol=1e-12)


def test_series_rows_and_right_continuity(octant):
    _, series = transport_curve(octant)
    rows = series.rows()
    assert len(rows) == octant.n + 1
    jumps = [r for r in rows if r[2] == 1]
    assert len(jumps) == 3
    s_jump = series.jumps[0].s
    assert series.sample(np.array([s_jump]))[0] == pytest.approx(series.jumps[0].right)


# geodesic_curvature

@pytest.mark.parametrize("backend", ["chart-formula", "sphere-formula", "theta-dot"])
def test_parallel_curvature_all_backends(backend):
    c = sample(SPHERE, parallel(math.pi / 4), 4096)
    k = geodesic_curvature(c, backend)[0]
    assert np.max(np.abs(k - 1.0)) <= 1e-6


def test_geodesic_has_zero_curvature():
    c = sample(SPHERE, [GeodesicPiece((0.9, 0.1), (1.7, 1.2))], 512)
    for backend in ("chart-formula", "sphere-formula"):
        assert np.max(np.abs(geodesic_curvature(c, backend)[0])) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.0, 0.4), b=st.floats(-0.3, 0.3), k=st.integers(1, 4))
def test_chart_and_sphere_formulas_agree(a, b, k):
    c = sample(SPHERE, chart_smooth(f"1.2 + {a!r}*sin({k}*t)", f"t + {b!r}*sin(t)", 0.0,
                                    2 * math.pi), 512)
    k1 = geodesic_curvature(c, "chart-formula")[0]
    k2 = geodesic_curvature(c, "sphere-formula")[0]
    assert np.max(np.abs(k1 - k2)) <= 1e-9


@pytest.mark.parametrize("th", PARALLELS)
def test_theta_dot_matches_chart_formula(th):
    c = sample(SPHERE, parallel(th), 4096)
    k1 = geodesic_curvature(c, "theta-dot")[0]
    k2 = geodesic_curvature(c, "chart-formula")[0]
    assert np.max(np.abs(k1 - k2)) <= 1e-4


def test_theta_dot_on_wavy_curve():
    c = sample(SPHERE, chart_smooth("1.2 + 0.2*sin(3*t)", "t", 0.0, 2 * math.pi), 4096)
    k1 = geodesic_curvature(c, "theta-dot")[0]
    k2 = geodesic_curvature(c, "chart-formula")[0]
    assert np.max(np.abs(k1 - k2)) <= 1e-4


def test_sphere_formula_needs_sphere():
    c = sample(flat_polar_chart(), chart_smooth("1.0", "t", 0.0, 1.0), 128)
    with pytest.raises(ValueError):
        geodesic_curvature(c, "sphere-formula")


def test_unknown_backend(par60):
    with pytest.raises(ValueError):
        geodesic_curvature(par60, "spline")


def test_fd_derivative_of_cubic_is_exact():
    x = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(fd_derivative(x ** 3, 0.1), 3 * x ** 2, atol=1e-12)


# transport_identity_check

def test_identity_on_parallel(par60):
    state, _ = transport_curve(par60)
    assert transport_identity_check(state, par60) <= 1e-7


def test_identity_on_wavy_curve():
    c = sample(SPHERE, chart_smooth("1.2 + 0.2*sin(3*t)", "t", 0.0, 2 * math.pi), 4096)
    state, _ = transport_curve(c)
    assert transport_identity_check(state, c) <= 1e-7


def test_identity_on_meridian_is_zero():
    c = sample(SPHERE, [GeodesicPiece((0.5, 0.3), (2.0, 0.3))], 256)
    state, _ = transport_curve(c)
    assert transport_identity_check(state, c) <= 1e-14


def test_identity_detects_frozen_field(par60):
    th = math.pi / 3
    frozen = TransportState(par60.s, np.full(par60.n + 1, 0.6), np.full(par60.n + 1, 0.8))
    # phi' = 1 / sin(theta), so the residual is cot(theta)
    assert transport_identity_check(frozen, par60) == pytest.approx(1 / math.tan(th), abs=1e-12)


# convergence of polygonal angle functions

@pytest.mark.parametrize("th", PARALLELS)
def test_l1_gap_halves_per_round(th):
    c = sample(SPHERE, parallel(th), 4096)
    _, smooth = transport_curve(c)
    X0 = c.segments[0].tangent[0]
    gaps = []
    for idx in polygonal.refinement_schedule(c, start=8, rounds=6):
        poly = polygonal.inscribe(c, None, indices=idx)
        gaps.append(angle_l1_gap(smooth, transport_polygonal(poly, X0), c.s))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all(np.abs(ratios - 2.0) <= 0.4)


def test_plane_transport_angle_is_tangent_angle():
    c = sample(Plane(), chart_smooth("cos(t)", "sin(t)", 0.0, 2.0), 256)
    _, series = transport_curve(c)
    # X stays fixed while tau turns at unit rate, so Theta = s
    np.testing.assert_allclose(series.theta(0), c.s, atol=1e-12)
