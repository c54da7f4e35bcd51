import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.curve import (CurveGapError, GeodesicPiece, SmoothPiece, arc_length_param,
                            cantor_graph, cantor_values, chart_smooth, conormal,
                            darboux_frame, geodesic_polygon, parallel, sample, tantrix_of)
from artifact.surface import Plane, custom_polar_chart, flat_polar_chart, sphere_chart

SPHERE = sphere_chart()
PLANE = Plane()


def e_phi(phi):
    return np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], -1)


def e_theta(theta, phi):
    return np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi),
                     -np.sin(theta) * np.ones_like(phi)], -1)


@pytest.fixture(scope="module")
def par60():
    return sample(SPHERE, parallel(math.pi / 3), 4096)


# arc_length_param

def test_parallel_length(par60):
    assert par60.length == pytest.approx(math.pi * math.sqrt(3.0), abs=1e-12)


def test_geodesic_arc_of_unit_length():
    c = sample(SPHERE, [GeodesicPiece((0.8, 0.4), (1.8, 0.4))], 256)
    assert c.length == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.diff(c.s), 1.0 / 256, atol=1e-12)


def test_cantor_length_against_deep_quadrature():
    v = cantor_values(12)
    x = np.linspace(0.0, 1.0, len(v))
    oracle = np.trapezoid(np.sqrt(1.0 + v * v), x)
    c = sample(PLANE, cantor_graph(8), 64)
    assert c.length == pytest.approx(oracle, abs=1e-3)


def test_cantor_values_monotone_endpoints():
    v = cantor_values(6)
    assert v[0] == 0.0 and v[-1] == 1.0
    assert np.all(np.diff(v) >= 0.0)
    assert v[len(v) // 2] == 0.5


def test_requires_enough_nodes():
    with pytest.raises(ValueError):
        sample(SPHERE, parallel(1.0), 32)


def test_gap_between_pieces_reports_location():
    pieces = [GeodesicPiece((1.0, 0.0), (1.2, 0.0)), GeodesicPiece((1.3, 0.0), (1.3, 0.5))]
    with pytest.raises(CurveGapError) as info:
        sample(SPHERE, pieces, 128)
    assert info.value.location == pytest.approx(0.2)


def test_declared_closed_but_open_raises():
    with pytest.raises(CurveGapError):
        arc_length_param(SPHERE, chart_smooth("1.0", "t", 0.0, 1.0), 128, closed=True)


def test_parallel_rejects_pole():
    with pytest.raises(ValueError):
        parallel(0.0)


def test_reparameterization_idempotent():
    th = 1.1
    unit = [SmoothPiece(repr(th), f"t / sin({th!r})", 0.0, 2.0 * math.pi * math.sin(th))]
    c = sample(SPHERE, unit, 1024)
    np.testing.assert_allclose(c.points[:, 1], c.s / math.sin(th), atol=1e-8)


def test_uniform_spacing_away_from_jumps():
    c = sample(SPHERE, chart_smooth("1.2 + 0.3*sin(3*t)", "t", 0.0, 2.0 * math.pi), 2048)
    X = SPHERE.embed(c.points)
    d = 2.0 * np.arcsin(np.linalg.norm(np.diff(X, axis=0), axis=1) / 2.0)
    h = c.length / c.n
    assert np.max(np.abs(d / h - 1.0)) < 0.05


def test_closed_curve_ends_coincide_and_junction_once():
    verts = [(1.0, 0.0), (1.2, 0.8), (0.7, 0.5)]
    c = sample(SPHERE, geodesic_polygon(verts), 600)
    assert c.closed
    assert SPHERE.same_point(c.points[0], c.points[-1], 1e-8)
    assert c.junction is not None
    assert len(c.jumps) == 2
    assert len(c.all_jumps()) == 3


def test_smooth_closed_curve_has_no_junction(par60):
    assert par60.closed and par60.junction is None and par60.is_smooth


# tantrix_of

def test_parallel_tantrix_is_e_phi(par60):
    t = tantrix_of(par60).pieces[0].values
    phi = par60.s / math.sin(math.pi / 3)
    np.testing.assert_allclose(t, e_phi(phi), atol=1e-9)


def test_polygon_jumps_at_vertices_with_geodesic_angles():
    verts = [(1.0, 0.0), (1.2, 0.8), (0.7, 0.5)]
    c = sample(SPHERE, geodesic_polygon(verts), 600)
    tx = tantrix_of(c)
    corners = [j.s for j in c.jumps] + [c.length]
    assert [j.s for j in tx.jumps] == pytest.approx(corners)
    for j, rec in zip(tx.jumps, c.all_jumps()):
        left, right = np.asarray(j.left), np.asarray(j.right)
        ang = math.atan2(np.linalg.norm(np.cross(left, right)), left @ right)
        assert ang == pytest.approx(abs(rec.angle), abs=1e-10)


def test_straight_planar_segment_has_constant_tantrix():
    c = sample(PLANE, chart_smooth("t", "2*t", 0.0, 1.0), 128)
    tx = tantrix_of(c)
    assert tx.jumps == []
    expected = np.tile(np.array([1.0, 2.0]) / math.sqrt(5.0), (c.n + 1, 1))
    np.testing.assert_allclose(tx.pieces[0].values, expected, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.05, 0.4), k=st.integers(1, 4), r0=st.floats(0.8, 2.2))
def test_tantrix_unit_norm(a, k, r0):
    c = sample(SPHERE, chart_smooth(f"{r0!r} + {a!r}*cos({k}*t)", "t", 0.0, 2.0 * math.pi),
               256)
    t = tantrix_of(c).pieces[0].values
    assert np.max(np.abs(np.linalg.norm(t, axis=1) - 1.0)) <= 1e-9


def test_intrinsic_tantrix_on_flat_chart():
    c = sample(flat_polar_chart(), chart_smooth("2.0", "t", 0.0, 1.0), 128)
    t = tantrix_of(c, embedded=False).pieces[0].values
    np.testing.assert_allclose(t, np.tile([0.0, 1.0], (129, 1)), atol=1e-12)


# darboux_frame

def test_parallel_conormal_is_minus_e_theta(par60):
    fr = darboux_frame(par60)[0]
    phi = par60.s / math.sin(math.pi / 3)
    np.testing.assert_allclose(fr.u, -e_theta(math.pi / 3, phi), atol=1e-9)


def _check_frames(frames):
    for f in frames:
        dots = (np.abs(np.sum(f.t * f.u, 1)) + np.abs(np.sum(f.t * f.n, 1))
                + np.abs(np.sum(f.u * f.n, 1)))
        assert np.max(dots) <= 1e-9
        for v in (f.t, f.n, f.u):
            assert np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)) <= 1e-9
        det = np.einsum("ij,ij->i", np.cross(f.t, f.u), f.n)
        assert np.all(det > 0.0)


def test_frame_orthonormal_on_sphere_polygon():
    c = sample(SPHERE, geodesic_polygon([(1.0, 0.0), (1.2, 0.8), (0.7, 0.5)]), 300)
    _check_frames(darboux_frame(c))


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.0, 0.3), b=st.floats(-0.5, 0.5))
def test_frame_orthonormal_property(a, b):
    c = sample(SPHERE, chart_smooth(f"1.0 + {a!r}*sin(t)", f"t + {b!r}*t*t", 0.0, 2.0), 128)
    _check_frames(darboux_frame(c))


def test_intrinsic_conormal_formula():
    chart = custom_polar_chart("sinh(r)^2 + r^2")
    c = sample(chart, chart_smooth("1.0 + 0.2*t", "0.7*t", 0.0, 1.0), 128)
    seg = c.segments[0]
    g = chart.metric(seg.points)
    rd, pd = seg.tangent[:, 0], seg.tangent[:, 1]
    expected = np.stack([-np.sqrt(g) * pd, rd / np.sqrt(g)], -1)
    u = conormal(chart, seg.points, seg.tangent)
    np.testing.assert_allclose(u, expected, atol=1e-12)
    # in the orthonormal frame u is tau rotated by +pi/2
    np.testing.assert_allclose(chart.orthonormal(seg.points, u),
                               np.stack([-np.sqrt(g) * pd, rd], -1), atol=1e-12)
