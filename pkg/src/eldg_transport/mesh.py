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
Cartesian meshes, modal Legendre bases, Gauss quadrature and DG fields.

All fields are stored in an orthonormal modal basis with respect to the
cell-averaged measure, so that the first coefficient is the cell mean and the
Eulerian mass matrix is the identity.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import legendre

from .consts import MAX_GAUSS_POINTS, SUPPORTED_DEGREES
from .errors import MeshError, QuadratureError

Array = np.ndarray


@dataclass(frozen=True)
class Mesh1D:
    x_lo: float
    x_hi: float
    N: int
    periodic: bool = True

    dim = 1

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise MeshError("Cell count must be an integer, got %r" % (self.N,))
        if self.N < 2:
            raise MeshError("Need at least 2 cells per axis, got %d" % self.N)
        if not (np.isfinite(self.x_lo) and np.isfinite(self.x_hi)):
            raise MeshError("Domain bounds must be finite")
        if self.x_lo >= self.x_hi:
            raise MeshError(
                "Invalid domain bounds [%r, %r]" % (self.x_lo, self.x_hi)
            )

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def dx(self) -> float:
        return self.length / self.N

    @property
    def edges(self) -> Array:
        edges = self.x_lo + self.dx * np.arange(self.N + 1)
        edges[-1] = self.x_hi
        return edges

    @property
    def centers(self) -> Array:
        return self.x_lo + self.dx * (np.arange(self.N) + 0.5)

    @property
    def widths(self) -> Array:
        return np.full(self.N, self.dx)

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return (self.N,)

    @property
    def num_cells(self) -> int:
        return self.N

    @property
    def cell_area(self) -> float:
        return self.dx

    @property
    def domain_measure(self) -> float:
        return self.length

    def locate(self, x: Array) -> Tuple[Array, Array]:
        """Cell index and reference coordinate in [-1, 1] of physical points"""
        x = np.asarray(x, dtype=float)
        if self.periodic:
            x = self.x_lo + np.mod(x - self.x_lo, self.length)
        scaled = (x - self.x_lo) / self.dx
        index = np.clip(np.floor(scaled).astype(int), 0, self.N - 1)
        local = 2.0 * (scaled - index) - 1.0
        return index, local

    def reference_to_physical(self, r: Array) -> Array:
        """Physical coordinates of reference points in every cell, (N, Q)"""
        return self.centers[:, None] + 0.5 * self.dx * np.asarray(r)[None, :]


@dataclass(frozen=True)
class Mesh2D:
    x: Mesh1D
    y: Mesh1D

    dim = 2

    @property
    def dx(self) -> float:
        return self.x.dx

    @property
    def dy(self) -> float:
        return self.y.dx

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return (self.x.N, self.y.N)

    @property
    def num_cells(self) -> int:
        return self.x.N * self.y.N

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def domain_measure(self) -> float:
        return self.x.length * self.y.length

    @property
    def periodic(self) -> Tuple[bool, bool]:
        return (self.x.periodic, self.y.periodic)

    def cell_index(self, cell: Union[int, Sequence[int]]) -> Tuple[int, int]:
        """Normalize a flat or (jx, jy) cell index"""
        if isinstance(cell, (int, np.integer)):
            if not 0 <= cell < self.num_cells:
                raise MeshError("Cell index %d out of range" % cell)
            return int(cell) // self.y.N, int(cell) % self.y.N
        jx, jy = cell
        if not (0 <= jx < self.x.N and 0 <= jy < self.y.N):
            raise MeshError("Cell index %r out of range" % (tuple(cell),))
        return int(jx), int(jy)

    def locate(self, x: Array, y: Array) -> Tuple[Array, Array, Array, Array]:
        ix, r = self.x.locate(x)
        iy, s = self.y.locate(y)
        return ix, iy, r, s

    def reference_to_physical(self, r: Array, s: Array) -> Tuple[Array, Array]:
        """Physical coordinates of reference points in every cell, (Nx, Ny, Q)"""
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        shape = self.cell_shape + r.shape
        xs = self.x.centers[:, None, None] + 0.5 * self.dx * r[None, None, :]
        ys = self.y.centers[None, :, None] + 0.5 * self.dy * s[None, None, :]
        return np.broadcast_to(xs, shape), np.broadcast_to(ys, shape)


Mesh = Union[Mesh1D, Mesh2D]


def build_mesh(
    bounds: Sequence,
    N: Union[int, Sequence[int]],
    periodic: Union[bool, Sequence[bool]] = True,
) -> Mesh:
    """Build a uniform mesh from (lo, hi) or ((x_lo, x_hi), (y_lo, y_hi))"""
    if np.ndim(bounds) == 2 and len(bounds) == 1:
        bounds = bounds[0]
    if np.ndim(bounds) == 1:
        if isinstance(periodic, (list, tuple)):
            periodic = periodic[0]
        if isinstance(N, (list, tuple)):
            N = N[0]
        lo, hi = bounds
        return Mesh1D(float(lo), float(hi), N, bool(periodic))
    if np.ndim(bounds) != 2 or len(bounds) != 2:
        raise MeshError("Unsupported domain bounds %r" % (bounds,))
    counts = (N, N) if isinstance(N, (int, np.integer)) else tuple(N)
    flags = (
        (periodic, periodic) if isinstance(periodic, bool) else tuple(periodic)
    )
    axes = [
        Mesh1D(float(lo), float(hi), n, bool(flag))
        for (lo, hi), n, flag in zip(bounds, counts, flags)
    ]
    return Mesh2D(axes[0], axes[1])


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss rule on [-1, 1], exact for polynomials up to `degree`"""

    nodes: Array
    weights: Array
    degree: int

    def tensor(self) -> Tuple[Array, Array, Array]:
        """Flattened tensor rule on [-1, 1]^2 (first axis slowest)"""
        r, s = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        w = np.outer(self.weights, self.weights)
        return r.ravel(), s.ravel(), w.ravel()


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise QuadratureError(
            "Gauss rule size must be in [1, %d], got %r" % (MAX_GAUSS_POINTS, n)
        )
    nodes, weights = legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, 2 * n - 1)


@lru_cache(maxsize=None)
def gauss_lobatto_nodes(n: int) -> Array:
    """n Gauss-Lobatto nodes on [-1, 1], endpoints included"""
    if n < 2:
        raise QuadratureError("Gauss-Lobatto rules need at least 2 nodes")
    interior = legendre.legroots(legendre.legder([0] * (n - 1) + [1]))
    nodes = np.concatenate(([-1.0], np.sort(np.real(interior)), [1.0]))
    nodes.setflags(write=False)
    return nodes


def _derivative_matrix(degree: int) -> Array:
    """D with P_m' = sum_l D[l, m] P_l"""
    matrix = np.zeros((degree + 1, degree + 1))
    for m in range(1, degree + 1):
        unit = np.zeros(degree + 1)
        unit[m] = 1.0
        deriv = legendre.legder(unit)
        matrix[: len(deriv), m] = deriv
    return matrix


class ReferenceBasis:
    """Orthonormal Legendre basis on [-1, 1] or total-degree basis on [-1, 1]^2.

    Normalized so that the reference average of psi_p * psi_q is delta_pq.
    """

    def __init__(self, degree: int, dim: int):
        if degree not in SUPPORTED_DEGREES:
            raise ValueError("Unsupported polynomial degree %r" % (degree,))
        if dim not in (1, 2):
            raise ValueError("Unsupported dimension %r" % (dim,))
        self.degree = degree
        self.dim = dim
        if dim == 1:
            self.exponents = [(a,) for a in range(degree + 1)]
        else:
            self.exponents = [
                (a, total - a)
                for total in range(degree + 1)
                for a in range(total, -1, -1)
            ]
        self.size = len(self.exponents)
        self._ax = np.array([e[0] for e in self.exponents])
        self._ay = np.array([e[-1] for e in self.exponents])
        self._scale = np.sqrt(2.0 * self._ax + 1.0)
        if dim == 2:
            self._scale = self._scale * np.sqrt(2.0 * self._ay + 1.0)
        self._dmat = _derivative_matrix(degree)

    def __repr__(self) -> str:
        return "ReferenceBasis(degree=%d, dim=%d)" % (self.degree, self.dim)

    def index(self, *exponent: int) -> int:
        return self.exponents.index(tuple(exponent))

    def _vander(self, r: Array) -> Array:
        # legvander promotes scalars to shape (1,)
        r = np.asarray(r, dtype=float)
        return legendre.legvander(r, self.degree).reshape(r.shape + (-1,))

    def evaluate(self, r: Array, s: Optional[Array] = None) -> Array:
        """Basis values, shape r.shape + (size,)"""
        vr = self._vander(r)
        if self.dim == 1:
            return vr * self._scale
        vs = self._vander(s)
        return vr[..., self._ax] * vs[..., self._ay] * self._scale

    def gradient(
        self, r: Array, s: Optional[Array] = None
    ) -> Union[Array, Tuple[Array, Array]]:
        """Reference derivatives; a tuple (d/dr, d/ds) in 2D"""
        vr = self._vander(r)
        dr = vr @ self._dmat
        if self.dim == 1:
            return dr * self._scale
        vs = self._vander(s)
        ds = vs @ self._dmat
        return (
            dr[..., self._ax] * vs[..., self._ay] * self._scale,
            vr[..., self._ax] * ds[..., self._ay] * self._scale,
        )


@lru_cache(maxsize=None)
def get_basis(degree: int, dim: int) -> ReferenceBasis:
    return ReferenceBasis(degree, dim)


@dataclass(frozen=True, eq=False)
class DGField:
    """Piecewise polynomial u_h: coefficients of shape cell_shape + (n_k,)"""

    mesh: Mesh
    degree: int
    coeffs: Array
    time: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        expected = self.mesh.cell_shape + (self.basis.size,)
        if coeffs.shape != expected:
            raise MeshError(
                "Coefficient shape %s does not match mesh/basis %s"
                % (coeffs.shape, expected)
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def basis(self) -> ReferenceBasis:
        return get_basis(self.degree, self.mesh.dim)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def cell_means(self) -> Array:
        return self.coeffs[..., 0]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.coeffs[..., 0]) * self.mesh.cell_area)

    def replace(
        self, coeffs: Optional[Array] = None, time: Optional[float] = None
    ) -> "DGField":
        return DGField(
            self.mesh,
            self.degree,
            self.coeffs if coeffs is None else coeffs,
            self.time if time is None else time,
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def values_at(self, r: Array, s: Optional[Array] = None) -> Array:
        """Values at the same reference points in every cell, cell_shape + (Q,)"""
        phi = self.basis.evaluate(r, s)
        return self.coeffs @ phi.T

    def evaluate(self, x: Array, y: Optional[Array] = None) -> Array:
        """Values at physical points (periodic axes wrap)"""
        if self.dim == 1:
            index, r = self.mesh.locate(x)
            phi = self.basis.evaluate(r)
            return np.sum(self.coeffs[index] * phi, axis=-1)
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        ix, iy, r, s = self.mesh.locate(x, y)
        phi = self.basis.evaluate(r, s)
        return np.sum(self.coeffs[ix, iy] * phi, axis=-1)


def project_function(
    f: Callable[..., Array], mesh: Mesh, k: int, time: float = 0.0
) -> DGField:
    """Cellwise L2 projection of a pointwise function onto V_h^k"""
    basis = get_basis(k, mesh.dim)
    rule = gauss_rule(k + 3)
    if mesh.dim == 1:
        xs = mesh.reference_to_physical(rule.nodes)
        values = np.broadcast_to(np.asarray(f(xs), dtype=float), xs.shape)
        phi = basis.evaluate(rule.nodes)
        coeffs = 0.5 * (values * rule.weights) @ phi
    else:
        r, s, w = rule.tensor()
        xs, ys = mesh.reference_to_physical(r, s)
        values = np.broadcast_to(np.asarray(f(xs, ys), dtype=float), xs.shape)
        phi = basis.evaluate(r, s)
        coeffs = 0.25 * (values * w) @ phi
    return DGField(mesh, k, coeffs, time)


def eval_field(
    field: DGField,
    cell: Union[int, Sequence[int]],
    r: Array,
    s: Optional[Array] = None,
) -> Array:
    """Evaluate u_h in one cell at reference points"""
    if field.dim == 1:
        if not 0 <= int(cell) < field.mesh.num_cells:  # type: ignore[arg-type]
            raise MeshError("Cell index %r out of range" % (cell,))
        coeffs = field.coeffs[int(cell)]  # type: ignore[arg-type]
    else:
        jx, jy = field.mesh.cell_index(cell)  # type: ignore[union-attr]
        coeffs = field.coeffs[jx, jy]
    return field.basis.evaluate(r, s) @ coeffs


Reference = Union[DGField, Callable[..., Array]]


def _is_inf(p) -> bool:
    return isinstance(p, str) and p.lower() in ("inf", "linf") or p == np.inf


def field_error(
    field: DGField, reference: Reference, p=2, normalized: bool = False
) -> float:
    """L1, L2 or L-infinity distance between a field and a function/field.

    With `normalized`, integrals are divided by the domain measure (mean-value
    norms).
    """
    mesh = field.mesh
    if isinstance(reference, DGField) and reference.mesh != mesh:
        raise MeshError("Cannot compare fields on different meshes")
    if _is_inf(p):
        samples = np.linspace(-1.0, 1.0, field.degree + 4)
        if mesh.dim == 1:
            r, s = samples, None
        else:
            rr, ss = np.meshgrid(samples, samples, indexing="ij")
            r, s = rr.ravel(), ss.ravel()
        diff = _difference(field, reference, r, s)
        return float(np.max(np.abs(diff)))
    if p not in (1, 2):
        raise ValueError("Unsupported norm %r" % (p,))
    rule = gauss_rule(field.degree + 3)
    if mesh.dim == 1:
        r, s, w = rule.nodes, None, 0.5 * rule.weights
    else:
        r, s, w = rule.tensor()
        w = 0.25 * w
    diff = _difference(field, reference, r, s)
    integral = float(np.sum(np.abs(diff) ** p * w)) * mesh.cell_area
    if normalized:
        integral /= mesh.domain_measure
    return integral if p == 1 else float(np.sqrt(integral))


def _difference(
    field: DGField, reference: Reference, r: Array, s: Optional[Array]
) -> Array:
    values = field.values_at(r, s)
    if isinstance(reference, DGField):
        return values - reference.values_at(r, s)
    if field.dim == 1:
        xs = field.mesh.reference_to_physical(r)  # type: ignore[call-arg]
        exact = reference(xs)
    else:
        xs, ys = field.mesh.reference_to_physical(r, s)  # type: ignore[call-arg]
        exact = reference(xs, ys)
    return values - np.broadcast_to(np.asarray(exact, dtype=float), values.shape)


def uniform_offsets(per_cell: int) -> Array:
    """Reference coordinates of `per_cell` uniformly spaced cell-interior points"""
    return -1.0 + (2.0 * np.arange(per_cell) + 1.0) / per_cell


def sample_uniform_grid(field: DGField, per_cell: int) -> Tuple[Array, ...]:
    """Sample u_h on a uniform grid with `per_cell` points per cell and axis.

    Returns (x, values) in 1D and (x, y, values) in 2D, with values indexed
    [iy, ix] in 2D.
    """
    offsets = uniform_offsets(per_cell)
    mesh = field.mesh
    if mesh.dim == 1:
        values = field.values_at(offsets).reshape(-1)
        xs = mesh.reference_to_physical(offsets).reshape(-1)
        return xs, values
    r, s = np.meshgrid(offsets, offsets, indexing="ij")
    local = field.values_at(r.ravel(), s.ravel())
    nx, ny = mesh.cell_shape
    grid = local.reshape(nx, ny, per_cell, per_cell)
    grid = grid.transpose(1, 3, 0, 2).reshape(ny * per_cell, nx * per_cell)
    xs = mesh.x.reference_to_physical(offsets).reshape(-1)
    ys = mesh.y.reference_to_physical(offsets).reshape(-1)
    return xs, ys, grid
