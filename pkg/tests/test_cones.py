import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import cone_frame_gram_schmidt, line_through, mirror_transmitter_point

from reflectloc.cones import (
    ConeGeometryError,
    SurfaceGeometry,
    build_direct_cone,
    build_reflection_cone,
    cone_point,
    reflection_geometry,
    reflection_point,
    spread_frame,
    wireframe_segments,
)
from reflectloc.sampler import contains
from reflectloc.simulator import mirror_project


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def zero_width(b_r, z_o, z_m=2.5, x_m=15.0):
    geom = reflection_geometry(b_r, b_r, b_r, z_o)
    return geom, build_reflection_cone(geom, SurfaceGeometry(z_o, z_m, x_m))


@pytest.mark.parametrize(
    "b, z_o, expected",
    [
        ((1, 0, -1), 2.0, (2, 0, -2)),
        ((0.8, 0, -1), 2.0, (1.6, 0, -2)),
        ((1, 1, -1), 3.0, (3, 3, -3)),
    ],
)
def test_reflection_point_examples(b, z_o, expected):
    np.testing.assert_allclose(reflection_point(unit(b), z_o), expected, atol=1e-12)


def test_reflection_point_matches_mirror_oracle():
    q = mirror_transmitter_point((4.0, 0.0, 1.0), 2.0)
    np.testing.assert_allclose(reflection_point(unit(q), 2.0), q, atol=1e-12)


@pytest.mark.parametrize(
    "b, msg",
    [((1, 0, 0.2), "no surface"), ((1, 0, 0), "no surface"), ((1, 0, -5e-4), "grazing"), ((-1, 0, -1), "behind")],
)
def test_reflection_point_errors(b, msg):
    with pytest.raises(ConeGeometryError, match=msg):
        reflection_point(np.asarray(b, dtype=float), 2.0)


def test_reflection_cone_example():
    geom, c = zero_width(unit((0.8, 0, -1)), 2.0)
    np.testing.assert_allclose(c.apex, [0, 0, -4], atol=1e-15)
    np.testing.assert_allclose(c.axis, unit((0.8, 0, 1)), atol=1e-12)
    assert c.alpha_max == 0.0 and c.upsilon_max == 0.0
    assert c.degenerate
    assert c.endpoint[2] == pytest.approx(2.5, abs=1e-12)
    assert c.l_min == pytest.approx(np.linalg.norm(c.apex - geom.r), abs=1e-12)


def test_upsilon_from_horizontal_extremum():
    r, r_h = np.array([2.0, 0.0, -2.0]), np.array([2.0, 0.2, -2.0])
    geom = reflection_geometry(unit(r), unit(r), unit(r_h), 2.0)
    np.testing.assert_allclose(geom.r_h, r_h, atol=1e-12)
    c = build_reflection_cone(geom, SurfaceGeometry(2.0, 2.5, 15.0))
    assert c.upsilon_max == pytest.approx(np.arctan(0.1), abs=1e-12)
    assert c.alpha_max == 0.0
    assert not c.degenerate


def test_alpha_uses_absolute_elevation_difference_and_cap():
    b_r, b_v = unit((1, 0, -1)), unit((1, 0, -1.2))
    geom = reflection_geometry(b_r, b_v, b_r, 2.0)
    surf = SurfaceGeometry(2.0, 2.5, 15.0)
    expected = np.arctan(1.2) - np.arctan(1.0)
    assert build_reflection_cone(geom, surf).alpha_max == pytest.approx(expected, abs=1e-12)
    # extremum nearer the horizon gives the same half-angle
    geom2 = reflection_geometry(b_r, unit((1.2, 0, -1.2 * np.tan(np.pi / 4 - expected))), b_r, 2.0)
    assert build_reflection_cone(geom2, surf).alpha_max == pytest.approx(expected, abs=1e-12)
    cap = np.deg2rad(4.0)
    assert build_reflection_cone(geom, surf, alpha_cap=cap).alpha_max == cap


def test_direct_cone_examples():
    c = build_direct_cone([1.0, 0.0, 0.0], 0.0, 0.0, 10.0)
    np.testing.assert_allclose(c.endpoint, [10, 0, 0], atol=1e-15)
    c = build_direct_cone(unit((4, 0, 1)), np.deg2rad(4), np.deg2rad(4), 40.0)
    np.testing.assert_allclose(c.endpoint, [40, 0, 10], atol=1e-12)
    np.testing.assert_allclose(c.apex, 0.0)
    assert c.alpha_max == pytest.approx(np.deg2rad(4))


def test_direct_cone_behind_camera():
    with pytest.raises(ConeGeometryError, match="behind"):
        build_direct_cone([-0.5, 0.0, 0.5], 0.1, 0.1, 10.0)
    with pytest.raises(ConeGeometryError, match="behind"):
        build_direct_cone([0.0, 1.0, 0.0], 0.1, 0.1, 10.0)


def test_surface_geometry_validation():
    for bad in [(0, 1, 1), (1, 0, 1), (1, 1, -1)]:
        with pytest.raises(ValueError):
            SurfaceGeometry(*bad)


def test_cone_point_examples():
    c = build_direct_cone(unit((4, 0, 1)), 0.05, 0.03, 40.0)
    np.testing.assert_allclose(cone_point(c, 1.3, 0.0, 0.02, 0.01), c.apex)
    np.testing.assert_allclose(cone_point(c, 0.0, c.length, 0.0, 0.0), c.endpoint, atol=1e-12)
    with pytest.raises(ValueError):
        cone_point(c, 7.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        cone_point(c, 1.0, c.length + 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        cone_point(c, 1.0, 1.0, 0.06, 0.0)


@st.composite
def bearings(draw, down=False):
    az = draw(st.floats(-1.2, 1.2))
    el = draw(st.floats(-1.2, -0.05) if down else st.floats(-1.2, 1.2))
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


@settings(max_examples=200, deadline=None)
@given(b=bearings())
def test_spread_frame_orthonormal_right_handed(b):
    n_v, n_h = spread_frame(b)
    frame = np.stack([b, n_v, n_h])
    np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(frame) == pytest.approx(1.0, abs=1e-9)
    _, v_ref, h_ref = cone_frame_gram_schmidt(np.zeros(3), b)
    np.testing.assert_allclose(n_v, v_ref, atol=1e-9)
    np.testing.assert_allclose(n_h, h_ref, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    t=st.tuples(st.floats(1.0, 30.0), st.floats(-10.0, 10.0), st.floats(-0.9, 5.0)),
    z_o=st.floats(1.0, 5.0),
)
def test_mirror_identity(t, z_o):
    t = np.array(t)
    if t[2] <= -z_o + 0.1:
        return
    q, bearing = mirror_project(t, z_o)
    np.testing.assert_allclose(q, mirror_transmitter_point(t, z_o), atol=1e-9)
    geom, c = zero_width(bearing, z_o, z_m=max(6.0, t[2] + 1.0))
    assert geom.r[2] == -z_o
    assert line_through(c.apex, c.endpoint, t) < 1e-9


@settings(max_examples=100, deadline=None)
@given(b=bearings(down=True), dv=st.floats(-0.05, 0.05), dh=st.floats(-0.05, 0.05), z_o=st.floats(0.5, 5.0))
def test_scaling_consistency(b, dv, dh, z_o):
    b_v = unit(b + np.array([0.0, 0.0, dv]))
    b_h = unit(b + np.array([0.0, dh, 0.0]))
    try:
        g1 = reflection_geometry(b, b_v, b_h, z_o)
        g2 = reflection_geometry(b, b_v, b_h, 2 * z_o)
    except ConeGeometryError:
        return
    for name in ("r", "r_v", "r_h"):
        assert getattr(g1, name)[2] == -z_o
        np.testing.assert_allclose(getattr(g2, name), 2 * getattr(g1, name), rtol=1e-12)
    assert g1.beta_r == g2.beta_r and g1.theta_r == g2.theta_r
    c1 = build_reflection_cone(g1, SurfaceGeometry(z_o, 3.0, 15.0))
    c2 = build_reflection_cone(g2, SurfaceGeometry(2 * z_o, 6.0, 15.0))
    np.testing.assert_allclose(c2.apex, 2 * c1.apex)
    assert c2.upsilon_max == pytest.approx(c1.upsilon_max, abs=1e-12)
    assert c2.alpha_max == pytest.approx(c1.alpha_max, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    b=bearings(),
    alpha=st.floats(0.0, 1.2),
    upsilon=st.floats(0.0, 1.2),
    u=st.tuples(*[st.floats(0.0, 1.0)] * 4),
)
def test_cone_point_is_member(b, alpha, upsilon, u):
    if b[0] <= 0.05:
        return
    c = build_direct_cone(b, alpha, upsilon, 20.0)
    p = cone_point(c, 2 * np.pi * u[0], c.length * u[1], alpha * u[2], upsilon * u[3])
    assert contains(c, p)
    assert contains(c, p, mode="local")


def test_wireframe_shape():
    c = build_direct_cone(unit((4, 0, 1)), 0.05, 0.03, 40.0)
    seg = wireframe_segments(c, n_rays=8)
    assert seg.shape == (1 + 8 + 8, 6)
    np.testing.assert_allclose(seg[0], np.concatenate([c.apex, c.endpoint]))
