"""Space-time maps, clipping and polygon quadrature."""

from math import factorial

import numpy as np
import numpy.testing as npt
import pytest

from eldg_transport.errors import GeometryError, MapInvalidError, TimeWindowError
from eldg_transport.geometry import (
    Polygon,
    SpaceTimeMap1D,
    SpaceTimeMap2D,
    clip_interval,
    clip_pieces,
    clip_to_grid,
    green_rule,
    polygon_integral,
    wrap_index,
)
from eldg_transport.mesh import Mesh1D, build_mesh


def _single_map(seed=0, dt=0.1):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-1, 1, (2, 2))
    beta = rng.uniform(-1, 1, (2, 2))
    return SpaceTimeMap2D(0.5, 0.5, 1.0, 1.0, alpha, beta, 1.0, dt)


def _rotated_square(center, half, angle):
    c, s = np.cos(angle), np.sin(angle)
    local = half * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(center)


def test_map1d_identity_at_anchor():
    maps = SpaceTimeMap1D(
        np.array([0.0, 0.5]), 0.5, np.array([1.0, 2.0]), np.array([2.0, 1.0]), 1.0, 0.2
    )
    r = np.array([-1.0, 0.0, 1.0])
    npt.assert_allclose(maps.map_local(r, 1.0), [[0.0, 0.25, 0.5], [0.5, 0.75, 1.0]])
    # the foot of the right edge moves by nu_right * dt
    npt.assert_allclose(maps.map_local(1.0, 0.8), [0.5 - 0.2 * 2.0, 1.0 - 0.2 * 1.0])
    npt.assert_allclose(maps.jacobian_local(0.0, 0.8), [0.6, 1.4])


def test_map1d_rejects_folded_cell():
    maps = SpaceTimeMap1D(
        np.array([0.0]), 0.1, np.array([0.0]), np.array([1.0]), 1.0, 0.5
    )
    with pytest.raises(MapInvalidError):
        maps.jacobian(np.array([0.05]), 0.5)


def test_time_window():
    maps = _single_map()
    with pytest.raises(TimeWindowError):
        maps.map_local(0.0, 0.0, 1.5)
    with pytest.raises(TimeWindowError):
        maps.map_local(0.0, 0.0, 0.8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_jacobian_matches_finite_differences(seed):
    maps = _single_map(seed)
    r = np.array([-0.8, -0.1, 0.4, 0.9])
    s = np.array([0.7, -0.6, 0.2, -1.0])
    tau = 0.93
    eps = 1e-6
    j11, j12, j21, j22, det = maps.jacobian_local(r, s, tau)
    xp, yp = maps.map_local(r + eps, s, tau)
    xm, ym = maps.map_local(r - eps, s, tau)
    npt.assert_allclose((xp - xm) / (2 * eps) * 2.0 / maps.hx, j11, atol=1e-6)
    npt.assert_allclose((yp - ym) / (2 * eps) * 2.0 / maps.hx, j21, atol=1e-6)
    xp, yp = maps.map_local(r, s + eps, tau)
    xm, ym = maps.map_local(r, s - eps, tau)
    npt.assert_allclose((xp - xm) / (2 * eps) * 2.0 / maps.hy, j12, atol=1e-6)
    npt.assert_allclose((yp - ym) / (2 * eps) * 2.0 / maps.hy, j22, atol=1e-6)
    npt.assert_allclose(det, j11 * j22 - j12 * j21)
    assert np.all(det > 0)


def test_jacobian_inverse():
    maps = _single_map(3)
    jac, det, inv = maps.jacobian(np.array([0.3, 0.6]), np.array([0.2, 0.9]), 0.95)
    npt.assert_allclose(jac @ inv, np.broadcast_to(np.eye(2), jac.shape), atol=1e-13)
    npt.assert_allclose(det, np.linalg.det(jac))


def test_upstream_polygon_area_matches_jacobian_integral():
    maps = _single_map(4, dt=0.05)
    poly = maps.upstream_polygon()
    nodes, weights = np.polynomial.legendre.leggauss(3)
    r, s = np.meshgrid(nodes, nodes, indexing="ij")
    det = maps.jacobian_local(r, s, maps.t_anchor - maps.dt)[-1]
    area = 0.25 * maps.hx * maps.hy * np.sum(np.outer(weights, weights) * det)
    assert poly.area == pytest.approx(area, rel=1e-13)


def test_polygon_orientation():
    with pytest.raises(GeometryError):
        Polygon(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    bowtie = Polygon(
        np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [1.0, -1.0], [0.0, 2.0]])
    )
    assert not bowtie.is_simple()
    assert Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])).is_simple()


@pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (2, 3), (4, 5), (0, 9)])
def test_polygon_integral_unit_square(a, b):
    square = Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    value = polygon_integral(square, lambda x, y: x**a * y**b, a + b)
    assert value == pytest.approx(1.0 / ((a + 1) * (b + 1)), rel=1e-13)


@pytest.mark.parametrize("a,b", [(2, 1), (3, 3), (0, 4)])
def test_polygon_integral_simplex(a, b):
    tri = Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    value = polygon_integral(tri, lambda x, y: x**a * y**b, a + b)
    assert value == pytest.approx(exact, rel=1e-12)


def test_polygon_integral_pentagon_against_dense_rule():
    angles = np.sort(np.random.default_rng(5).uniform(0, 2 * np.pi, 5))
    verts = np.column_stack([0.3 + np.cos(angles), -0.2 + np.sin(angles)])
    pentagon = Polygon(verts)

    def integrand(x, y):
        return x**2 * y**3

    # fan triangulation with a high-order collapsed tensor rule
    nodes, weights = np.polynomial.legendre.leggauss(12)
    u, v = np.meshgrid(0.5 * (nodes + 1), 0.5 * (nodes + 1), indexing="ij")
    w = np.outer(weights, weights) * 0.25 * (1 - u)
    dense = 0.0
    p0 = verts[0]
    for p1, p2 in zip(verts[1:-1], verts[2:]):
        x = p0[0] + u * (p1[0] - p0[0]) + (1 - u) * v * (p2[0] - p0[0])
        y = p0[1] + u * (p1[1] - p0[1]) + (1 - u) * v * (p2[1] - p0[1])
        e1, e2 = p1 - p0, p2 - p0
        jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
        dense += jac * np.sum(w * integrand(x, y))
    value = polygon_integral(pentagon, integrand, 5)
    assert value == pytest.approx(dense, rel=1e-10)


def test_green_rule_degree_bound():
    edge = np.array([[0.0, 0.0]])
    with pytest.raises(GeometryError):
        green_rule(edge, edge, np.zeros(1), 10)


def test_clip_interval_splits_at_edges():
    axis = Mesh1D(0.0, 1.0, 4)
    parts = clip_interval(-0.1, 0.35, axis)
    assert [p[0] for p in parts] == [-1, 0, 1]
    bounds = [p[1:] for p in parts]
    npt.assert_allclose(bounds, [[-0.1, 0.0], [0.0, 0.25], [0.25, 0.35]])
    assert clip_interval(0.25 + 1e-15, 0.5, axis) == [(1, 0.25, 0.5)]


def test_wrap_index():
    axis = Mesh1D(0.0, 1.0, 8)
    assert wrap_index(3, axis) == (3, 0.0)
    assert wrap_index(-1, axis) == (7, -1.0)
    assert wrap_index(9, axis) == (1, 1.0)
    with pytest.raises(GeometryError):
        wrap_index(-1, Mesh1D(0.0, 1.0, 8, periodic=False))


@pytest.mark.parametrize("center", [(0.43, 0.57), (0.02, 0.5), (0.97, 0.99)])
def test_clipping_partitions_area_and_moments(center):
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 8)
    verts = _rotated_square(center, 0.17, 0.3)
    quad = Polygon(verts)
    pieces = clip_pieces([tuple(v) for v in verts], mesh)
    areas = [Polygon(np.asarray(p)).area for _, _, p in pieces]
    assert sum(areas) == pytest.approx(quad.area, rel=1e-12)
    moment = sum(
        polygon_integral(Polygon(np.asarray(p)), lambda x, y: x * y**2, 3)
        for _, _, p in pieces
    )
    expected = polygon_integral(quad, lambda x, y: x * y**2, 3)
    assert moment == pytest.approx(expected, rel=1e-12, abs=1e-15)
    for jx, jy, points in pieces:
        pts = np.asarray(points)
        assert np.all(pts[:, 0] >= jx * mesh.dx - 1e-14)
        assert np.all(pts[:, 0] <= (jx + 1) * mesh.dx + 1e-14)
        assert np.all(pts[:, 1] >= jy * mesh.dy - 1e-14)
        assert np.all(pts[:, 1] <= (jy + 1) * mesh.dy + 1e-14)
    assert pieces


def test_clip_to_grid_wraps_into_domain():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 8)
    quad = Polygon(_rotated_square((0.01, 0.26), 0.05, 0.0))
    pieces = clip_to_grid(quad, mesh)
    assert {p.cell for p in pieces} == {(7, 1), (7, 2), (0, 1), (0, 2)}
    for piece in pieces:
        lo_x, hi_x, lo_y, hi_y = piece.polygon.bounding_box()
        assert 0.0 <= lo_x and hi_x <= 1.0
    assert sum(p.polygon.area for p in pieces) == pytest.approx(quad.area, rel=1e-12)


def test_clipping_rejects_wide_polygons():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 4)
    wide = [(0.0, 0.0), (1.2, 0.0), (1.2, 0.1), (0.0, 0.1)]
    with pytest.raises(GeometryError):
        clip_pieces(wide, mesh)
