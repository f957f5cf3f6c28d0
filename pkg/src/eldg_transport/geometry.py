# -*- coding: utf-8 -*-

# ELDG Transport
#
# Copyright (C) 2022-2026  ELDG Transport contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""
Characteristic space-time maps, upstream cells, grid clipping and polygon
quadrature.

Maps are anchored at t^{n+1}: a cell point xi moves backwards in time along
a straight characteristic with the (bi)linearly interpolated vertex velocity,
x(tau) = xi - alpha(xi) * (t^{n+1} - tau). A map object holds either a single
cell (scalar fields) or a whole mesh (arrays over cells); outputs are shaped
cell_shape + point_shape.
"""

import logging
from dataclasses import dataclass
from math import ceil, floor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .consts import MAX_POLYGON_DEGREE, PIECE_AREA_FLOOR, SNAP_TOLERANCE
from .errors import GeometryError, MapInvalidError, TimeWindowError
from .logger import logger
from .mesh import Mesh1D, Mesh2D, gauss_rule

Array = np.ndarray
Point = Tuple[float, float]

_TIME_SLACK = 1e-12


def _cells(values, points) -> Array:
    """Broadcast per-cell data against an array of points"""
    return np.asarray(values)[(Ellipsis,) + (None,) * np.ndim(points)]


def _check_window(tau: float, t_anchor: float, dt: float) -> float:
    slack = _TIME_SLACK * max(abs(dt), 1.0)
    if not (t_anchor - dt - slack <= tau <= t_anchor + slack):
        raise TimeWindowError(
            "tau=%r outside step window [%r, %r]" % (tau, t_anchor - dt, t_anchor)
        )
    return t_anchor - tau


@dataclass(frozen=True, eq=False)
class SpaceTimeMap1D:
    x_left: Array
    dx: float
    nu_left: Array
    nu_right: Array
    t_anchor: float
    dt: float

    def velocity_local(self, r: Array) -> Array:
        r = np.asarray(r, dtype=float)
        return 0.5 * (_cells(self.nu_left, r) * (1.0 - r)) + 0.5 * (
            _cells(self.nu_right, r) * (1.0 + r)
        )

    def map_local(self, r: Array, tau: float) -> Array:
        theta = _check_window(tau, self.t_anchor, self.dt)
        r = np.asarray(r, dtype=float)
        xi = _cells(self.x_left, r) + 0.5 * self.dx * (r + 1.0)
        return xi - self.velocity_local(r) * theta

    def jacobian_local(self, r: Array, tau: float) -> Array:
        theta = _check_window(tau, self.t_anchor, self.dt)
        slope = (np.asarray(self.nu_right) - np.asarray(self.nu_left)) / self.dx
        return np.broadcast_to(
            _cells(1.0 - slope * theta, r), np.shape(slope) + np.shape(r)
        )

    def _to_local(self, xi: Array) -> Array:
        return 2.0 * (np.asarray(xi, dtype=float) - self.x_left) / self.dx - 1.0

    def map_point(self, xi: Array, tau: float) -> Array:
        """Image at time tau of a physical point of the cell at t^{n+1}"""
        return self.map_local(self._to_local(xi), tau)

    def jacobian(self, xi: Array, tau: float) -> Array:
        jac = self.jacobian_local(self._to_local(xi), tau)
        bad = np.argwhere(jac <= 0.0)
        if bad.size:
            where = tuple(bad[0])
            raise MapInvalidError(
                (float(np.broadcast_to(xi, jac.shape)[where]),), tau, float(jac[where])
            )
        return jac

    def upstream_interval(self, tau: Optional[float] = None) -> Tuple[Array, Array]:
        """Unwrapped endpoints of the cell image at tau (default t^n)"""
        tau = self.t_anchor - self.dt if tau is None else tau
        return self.map_local(-1.0, tau), self.map_local(1.0, tau)


def _bilinear(values: Array, r: Array, s: Array) -> Array:
    v = np.asarray(values)
    v00, v10 = _cells(v[..., 0, 0], r), _cells(v[..., 1, 0], r)
    v01, v11 = _cells(v[..., 0, 1], r), _cells(v[..., 1, 1], r)
    return 0.25 * (
        v00 * (1 - r) * (1 - s)
        + v10 * (1 + r) * (1 - s)
        + v01 * (1 - r) * (1 + s)
        + v11 * (1 + r) * (1 + s)
    )


def _bilinear_slopes(values: Array, r: Array, s: Array) -> Tuple[Array, Array]:
    """Derivatives with respect to the reference coordinates (r, s)"""
    v = np.asarray(values)
    v00, v10 = _cells(v[..., 0, 0], r), _cells(v[..., 1, 0], r)
    v01, v11 = _cells(v[..., 0, 1], r), _cells(v[..., 1, 1], r)
    d_r = 0.25 * ((v10 - v00) * (1 - s) + (v11 - v01) * (1 + s))
    d_s = 0.25 * ((v01 - v00) * (1 - r) + (v11 - v10) * (1 + r))
    return d_r, d_s


@dataclass(frozen=True, eq=False)
class SpaceTimeMap2D:
    """Bilinear characteristic map of rectangular cells.

    alpha and beta hold the corner velocities indexed [..., ix, iy] with
    0 = left/bottom and 1 = right/top.
    """

    xc: Array
    yc: Array
    hx: float
    hy: float
    alpha: Array
    beta: Array
    t_anchor: float
    dt: float

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return np.shape(self.alpha)[:-2]

    def theta(self, tau: float) -> float:
        return _check_window(tau, self.t_anchor, self.dt)

    def velocity_local(self, r: Array, s: Array) -> Tuple[Array, Array]:
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        return _bilinear(self.alpha, r, s), _bilinear(self.beta, r, s)

    def map_local(self, r: Array, s: Array, tau: float) -> Tuple[Array, Array]:
        theta = self.theta(tau)
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        a, b = self.velocity_local(r, s)
        x = _cells(self.xc, r) + 0.5 * self.hx * r - a * theta
        y = _cells(self.yc, r) + 0.5 * self.hy * s - b * theta
        return x, y

    def jacobian_local(
        self, r: Array, s: Array, tau: float
    ) -> Tuple[Array, Array, Array, Array, Array]:
        """(J11, J12, J21, J22, det J) by direct differentiation of the map"""
        theta = self.theta(tau)
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        a_r, a_s = _bilinear_slopes(self.alpha, r, s)
        b_r, b_s = _bilinear_slopes(self.beta, r, s)
        j11 = 1.0 - theta * a_r * (2.0 / self.hx)
        j12 = -theta * a_s * (2.0 / self.hy)
        j21 = -theta * b_r * (2.0 / self.hx)
        j22 = 1.0 - theta * b_s * (2.0 / self.hy)
        return j11, j12, j21, j22, j11 * j22 - j12 * j21

    def _to_local(self, xi: Array, eta: Array) -> Tuple[Array, Array]:
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        return (
            2.0 * (xi - self.xc) / self.hx,
            2.0 * (eta - self.yc) / self.hy,
        )

    def map_point(self, xi: Array, eta: Array, tau: float) -> Tuple[Array, Array]:
        """Image at time tau of a physical cell point given at t^{n+1}"""
        return self.map_local(*self._to_local(xi, eta), tau)

    def jacobian(self, xi: Array, eta: Array, tau: float) -> Tuple[Array, Array, Array]:
        """J (shape ... x 2 x 2), det J and J^{-1} from the adjugate"""
        j11, j12, j21, j22, det = self.jacobian_local(*self._to_local(xi, eta), tau)
        bad = np.argwhere(det <= 0.0)
        if bad.size:
            where = tuple(bad[0])
            point = (
                float(np.broadcast_to(xi, det.shape)[where]),
                float(np.broadcast_to(eta, det.shape)[where]),
            )
            raise MapInvalidError(point, tau, float(det[where]))
        jac = np.stack([np.stack([j11, j12], -1), np.stack([j21, j22], -1)], -2)
        adj = np.stack([np.stack([j22, -j12], -1), np.stack([-j21, j11], -1)], -2)
        return jac, det, adj / det[..., None, None]

    def corners(self, tau: float) -> Tuple[Array, Array]:
        """Counterclockwise images of the four cell corners"""
        r = np.array([-1.0, 1.0, 1.0, -1.0])
        s = np.array([-1.0, -1.0, 1.0, 1.0])
        return self.map_local(r, s, tau)

    def select(self, jx: int, jy: int) -> "SpaceTimeMap2D":
        """Single-cell map out of a mesh-wide map"""
        shape = self.cell_shape
        return SpaceTimeMap2D(
            float(np.broadcast_to(self.xc, shape)[jx, jy]),
            float(np.broadcast_to(self.yc, shape)[jx, jy]),
            self.hx,
            self.hy,
            np.asarray(self.alpha)[jx, jy],
            np.asarray(self.beta)[jx, jy],
            self.t_anchor,
            self.dt,
        )

    def upstream_polygon(self, tau: Optional[float] = None) -> "Polygon":
        """Unwrapped upstream quadrilateral of a single-cell map"""
        if self.cell_shape:
            raise GeometryError("upstream_polygon needs a single-cell map")
        tau = self.t_anchor - self.dt if tau is None else tau
        r = np.array([-1.0, 1.0, 1.0, -1.0])
        s = np.array([-1.0, -1.0, 1.0, 1.0])
        det = self.jacobian_local(r, s, tau)[-1]
        if np.any(det <= 0.0):
            corner = int(np.argmin(det))
            raise MapInvalidError(
                (
                    float(self.xc + 0.5 * self.hx * r[corner]),
                    float(self.yc + 0.5 * self.hy * s[corner]),
                ),
                tau,
                float(det[corner]),
            )
        x, y = self.map_local(r, s, tau)
        polygon = Polygon(np.column_stack([x, y]))
        if logger.isEnabledFor(logging.DEBUG) and not polygon.is_simple():
            raise GeometryError("Upstream quadrilateral self-intersects")
        return polygon


def _shoelace(points: Sequence[Point]) -> float:
    area = 0.0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i - 1]
        x1, y1 = points[i]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


@dataclass(frozen=True, eq=False)
class Polygon:
    """Closed counterclockwise polygon, vertices of shape (n, 2)"""

    vertices: Array

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise GeometryError("A polygon needs at least 3 vertices")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        if self.signed_area() <= 0.0:
            raise GeometryError("Polygon must be counterclockwise with positive area")

    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(np.roll(x, 1) * y - x * np.roll(y, 1)))

    @property
    def area(self) -> float:
        return abs(self.signed_area())

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self.vertices + np.array([dx, dy]))

    def bounding_box(self) -> Tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def is_simple(self) -> bool:
        """Pairwise test of non-adjacent edges (meant for small polygons)"""
        verts = [tuple(v) for v in self.vertices]
        n = len(verts)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(
                    verts[i], verts[(i + 1) % n], verts[j], verts[(j + 1) % n]
                ):
                    return False
        return True


@dataclass(frozen=True, eq=False)
class ClippedPiece:
    """Part of an upstream cell inside one background cell.

    `polygon` is translated into the primary domain; adding `shift` gives the
    unwrapped position.
    """

    cell: Tuple[int, ...]
    polygon: Polygon
    shift: Tuple[float, float]


def _clip_axis(
    points: List[Point], axis: int, value: float, keep_above: bool
) -> List[Point]:
    """Sutherland-Hodgman clip against one axis-aligned half plane"""
    out: List[Point] = []
    n = len(points)
    if n == 0:
        return out
    prev = points[-1]
    prev_in = prev[axis] >= value if keep_above else prev[axis] <= value
    for cur in points:
        cur_in = cur[axis] >= value if keep_above else cur[axis] <= value
        if cur_in != prev_in:
            t = (value - prev[axis]) / (cur[axis] - prev[axis])
            other = prev[1 - axis] + t * (cur[1 - axis] - prev[1 - axis])
            out.append((value, other) if axis == 0 else (other, value))
        if cur_in:
            out.append(cur)
        prev, prev_in = cur, cur_in
    return out


def _dedupe(points: List[Point]) -> List[Point]:
    out: List[Point] = []
    for p in points:
        if not out or p != out[-1]:
            out.append(p)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _snap(value: float, lo: float, h: float, tol: float) -> float:
    line = lo + round((value - lo) / h) * h
    return line if abs(value - line) < tol else value


def clip_pieces(
    vertices: Sequence[Point], mesh: Mesh2D
) -> List[Tuple[int, int, List[Point]]]:
    """Split an unwrapped polygon along grid lines.

    Returns (jx, jy, points) with unwrapped background indices, which may lie
    outside [0, N) on periodic axes.
    """
    hx, hy = mesh.dx, mesh.dy
    x_lo, y_lo = mesh.x.x_lo, mesh.y.x_lo
    tol = SNAP_TOLERANCE * min(hx, hy)
    floor_area = PIECE_AREA_FLOOR * hx * hy
    points = [
        (_snap(float(x), x_lo, hx, tol), _snap(float(y), y_lo, hy, tol))
        for x, y in vertices
    ]
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    if max(xs) - min(xs) >= mesh.x.length or max(ys) - min(ys) >= mesh.y.length:
        raise GeometryError("Upstream cell wider than the periodic domain")
    jx0 = floor((min(xs) - x_lo) / hx)
    jx1 = max(jx0, ceil((max(xs) - x_lo) / hx) - 1)
    pieces = []
    for jx in range(jx0, jx1 + 1):
        left = x_lo + jx * hx
        strip = _clip_axis(points, 0, left, True)
        strip = _clip_axis(strip, 0, left + hx, False)
        if len(strip) < 3:
            continue
        sy = [p[1] for p in strip]
        jy0 = floor((min(sy) - y_lo) / hy)
        jy1 = max(jy0, ceil((max(sy) - y_lo) / hy) - 1)
        for jy in range(jy0, jy1 + 1):
            bottom = y_lo + jy * hy
            piece = _clip_axis(strip, 1, bottom, True)
            piece = _dedupe(_clip_axis(piece, 1, bottom + hy, False))
            if len(piece) < 3 or _shoelace(piece) < floor_area:
                continue
            pieces.append((jx, jy, piece))
    return pieces


def wrap_index(j: int, axis: Mesh1D) -> Tuple[int, float]:
    """Wrapped cell index and the translation taking it to unwrapped position"""
    if 0 <= j < axis.N:
        return j, 0.0
    if not axis.periodic:
        raise GeometryError(
            "Upstream cell leaves the non-periodic domain at cell %d" % j
        )
    turns = j // axis.N
    return j - turns * axis.N, turns * axis.length


def clip_to_grid(quad: Polygon, mesh: Mesh2D) -> List[ClippedPiece]:
    """Decompose a (possibly unwrapped) polygon into background-cell pieces"""
    if quad.area < PIECE_AREA_FLOOR * mesh.cell_area:
        raise GeometryError("Degenerate upstream quadrilateral (area %g)" % quad.area)
    result = []
    for jx, jy, points in clip_pieces([tuple(v) for v in quad.vertices], mesh):
        wx, sx = wrap_index(jx, mesh.x)
        wy, sy = wrap_index(jy, mesh.y)
        polygon = Polygon(np.asarray(points) - np.array([sx, sy]))
        result.append(ClippedPiece((wx, wy), polygon, (sx, sy)))
    logger.debug("clipped quadrilateral into %d pieces", len(result))
    return result


def clip_interval(lo: float, hi: float, axis: Mesh1D) -> List[Tuple[int, float, float]]:
    """Split an unwrapped interval at grid edges: (unwrapped j, a, b) triples"""
    h = axis.dx
    tol = SNAP_TOLERANCE * h
    lo = _snap(lo, axis.x_lo, h, tol)
    hi = _snap(hi, axis.x_lo, h, tol)
    j0 = floor((lo - axis.x_lo) / h)
    j1 = max(j0, ceil((hi - axis.x_lo) / h) - 1)
    parts = []
    for j in range(j0, j1 + 1):
        a = max(lo, axis.x_lo + j * h)
        b = min(hi, axis.x_lo + (j + 1) * h)
        if b - a > PIECE_AREA_FLOOR * h:
            parts.append((j, a, b))
    return parts


def green_rule(
    starts: Array, ends: Array, origins: Array, degree: int
) -> Tuple[Array, Array]:
    """Quadrature points and weights for polygon areas bounded by edges.

    Uses the area integral of g as the boundary integral of P dy, where
    P(x, y) = int_{x0}^{x} g(s, y) ds is itself evaluated by Gauss quadrature.
    Exact for polynomial g of total degree <= `degree`. Returns points of shape
    (E, ne, ni, 2) and weights (E, ne, ni).
    """
    if not 0 <= degree <= MAX_POLYGON_DEGREE:
        raise GeometryError(
            "Polygon integrand degree %d above supported bound %d"
            % (degree, MAX_POLYGON_DEGREE)
        )
    edge = gauss_rule(max(1, ceil((degree + 2) / 2)))
    inner = gauss_rule(max(1, ceil((degree + 1) / 2)))
    te, we = 0.5 * (edge.nodes + 1.0), 0.5 * edge.weights
    ti, wi = 0.5 * (inner.nodes + 1.0), 0.5 * inner.weights
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    x0 = np.asarray(origins, dtype=float)[:, None]
    xe = starts[:, None, 0] + te[None, :] * (ends[:, None, 0] - starts[:, None, 0])
    ye = starts[:, None, 1] + te[None, :] * (ends[:, None, 1] - starts[:, None, 1])
    dy = ends[:, 1] - starts[:, 1]
    reach = xe - x0
    px = x0[:, :, None] + ti[None, None, :] * reach[:, :, None]
    py = np.broadcast_to(ye[:, :, None], px.shape)
    weights = (
        we[None, :, None] * wi[None, None, :] * (dy[:, None, None] * reach[:, :, None])
    )
    return np.stack([px, py], axis=-1), weights


def polygon_edges(vertices: Array) -> Tuple[Array, Array]:
    verts = np.asarray(vertices, dtype=float)
    return verts, np.roll(verts, -1, axis=0)


def polygon_integral(
    poly: Polygon,
    integrand: Callable[[Array, Array], Array],
    degree: int,
    origin: Optional[float] = None,
) -> Array:
    """Integral of a polynomial over a polygon (scalar or vector integrand)"""
    starts, ends = polygon_edges(poly.vertices)
    x0 = float(poly.vertices[:, 0].min()) if origin is None else origin
    points, weights = green_rule(starts, ends, np.full(len(starts), x0), degree)
    pts = points.reshape(-1, 2)
    values = np.asarray(integrand(pts[:, 0], pts[:, 1]), dtype=float)
    w = weights.reshape(-1)
    if values.ndim <= 1:
        return float(np.dot(np.broadcast_to(values, w.shape), w))
    return np.tensordot(w, values, axes=(0, 0))
