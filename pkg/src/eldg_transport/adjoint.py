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
Velocity fields, modified-adjoint vertex velocities, characteristic tracing
and time-step admissibility.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .consts import JACOBIAN_FLOOR, MAX_HALVINGS
from .errors import DistortionError
from .geometry import SpaceTimeMap1D, SpaceTimeMap2D
from .logger import logger
from .mesh import Mesh, Mesh1D, Mesh2D, gauss_rule
from .utils import wrap_periodic

Array = np.ndarray

ST1 = "ST1"
ST2 = "ST2"
ZERO = "ZERO"


class VelocityField:
    """Transport velocity a(x, t) in 1D or (a, b)(x, y, t) in 2D.

    `periodic` states that the field takes equal values on opposite sides of
    the periodic domain, so seam vertices may share one stored value.
    """

    def __init__(
        self,
        evaluator: Callable[..., Union[Array, Tuple[Array, Array]]],
        dim: int,
        max_speed: Sequence[float],
        divergence_free: bool = True,
        time_independent: bool = False,
        periodic: bool = True,
        name: str = "",
    ):
        self.evaluator = evaluator
        self.dim = dim
        self.max_speed = tuple(float(v) for v in max_speed)
        self.divergence_free = divergence_free
        self.time_independent = time_independent
        self.periodic = periodic
        self.name = name

    def __repr__(self) -> str:
        return "%s(%r, dim=%d)" % (type(self).__name__, self.name, self.dim)

    def __call__(self, x, y=None, t: float = 0.0):
        if self.dim == 1:
            return np.broadcast_to(
                np.asarray(self.evaluator(x, t), dtype=float), np.shape(x)
            )
        a, b = self.evaluator(x, y, t)
        shape = np.broadcast(x, y).shape
        return (
            np.broadcast_to(np.asarray(a, dtype=float), shape),
            np.broadcast_to(np.asarray(b, dtype=float), shape),
        )

    def max_speeds(self, t: float = 0.0) -> Tuple[float, ...]:
        return self.max_speed


@dataclass(frozen=True, eq=False)
class AdjointField:
    """Vertex velocities of the modified adjoint problem at t^{n+1}.

    1D values have shape (N+1,); 2D values (Nx+1, Ny+1, 2). Each vertex is
    stored once and read by all incident cells.
    """

    mesh: Mesh
    values: Array
    t_anchor: float
    tag: str = ST1

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def edge_values(self) -> Array:
        return self.values

    def maps(self, dt: float) -> Union[SpaceTimeMap1D, SpaceTimeMap2D]:
        """Mesh-wide space-time maps for the step (t^{n+1} - dt, t^{n+1}]"""
        mesh = self.mesh
        if isinstance(mesh, Mesh1D):
            return SpaceTimeMap1D(
                mesh.edges[:-1],
                mesh.dx,
                self.values[:-1],
                self.values[1:],
                self.t_anchor,
                dt,
            )
        shape = mesh.cell_shape
        corners = np.empty(shape + (2, 2, 2))
        corners[:, :, 0, 0] = self.values[:-1, :-1]
        corners[:, :, 1, 0] = self.values[1:, :-1]
        corners[:, :, 0, 1] = self.values[:-1, 1:]
        corners[:, :, 1, 1] = self.values[1:, 1:]
        xc = np.broadcast_to(mesh.x.centers[:, None], shape)
        yc = np.broadcast_to(mesh.y.centers[None, :], shape)
        return SpaceTimeMap2D(
            xc,
            yc,
            mesh.dx,
            mesh.dy,
            corners[..., 0],
            corners[..., 1],
            self.t_anchor,
            dt,
        )

    def interpolate(self, x: Array, y: Optional[Array] = None):
        """Cellwise (bi)linear adjoint velocity at physical points, t^{n+1}"""
        mesh = self.mesh
        if isinstance(mesh, Mesh1D):
            j, r = mesh.locate(x)
            return 0.5 * (self.values[j] * (1 - r) + self.values[j + 1] * (1 + r))
        ix, iy, r, s = mesh.locate(x, y)
        w00 = 0.25 * (1 - r) * (1 - s)
        w10 = 0.25 * (1 + r) * (1 - s)
        w01 = 0.25 * (1 - r) * (1 + s)
        w11 = 0.25 * (1 + r) * (1 + s)
        v = self.values
        out = (
            v[ix, iy] * w00[..., None]
            + v[ix + 1, iy] * w10[..., None]
            + v[ix, iy + 1] * w01[..., None]
            + v[ix + 1, iy + 1] * w11[..., None]
        )
        return out[..., 0], out[..., 1]


def mesh_vertices(mesh: Mesh) -> Tuple[Array, ...]:
    if isinstance(mesh, Mesh1D):
        return (mesh.edges,)
    return tuple(np.meshgrid(mesh.x.edges, mesh.y.edges, indexing="ij"))


def _share_seams(values: Array, mesh: Mesh) -> Array:
    """Copy first-vertex values onto the last vertex of periodic axes"""
    if isinstance(mesh, Mesh1D):
        if mesh.periodic:
            values[-1] = values[0]
        return values
    if mesh.x.periodic:
        values[-1, :] = values[0, :]
    if mesh.y.periodic:
        values[:, -1] = values[:, 0]
    return values


VertexSampler = Callable[..., Array]


def build_adjoint_st1(
    velocity: VelocityField,
    mesh: Mesh,
    t_anchor: float,
    sampler: Optional[VertexSampler] = None,
) -> AdjointField:
    """Vertex velocities sampled pointwise at t^{n+1}.

    `sampler(mesh, t)` may replace the sampling to prescribe vertex values.
    """
    if sampler is not None:
        values = np.array(sampler(mesh, t_anchor), dtype=float)
    elif isinstance(mesh, Mesh1D):
        values = np.array(velocity(mesh.edges, t=t_anchor), dtype=float)
    else:
        xv, yv = mesh_vertices(mesh)
        a, b = velocity(xv, yv, t=t_anchor)
        values = np.stack([a, b], axis=-1)
    if velocity.periodic:
        values = _share_seams(values, mesh)
    return AdjointField(mesh, values, t_anchor, ST1)


def zero_adjoint(mesh: Mesh, t_anchor: float) -> AdjointField:
    if isinstance(mesh, Mesh1D):
        shape: Tuple[int, ...] = (mesh.N + 1,)
    else:
        shape = (mesh.x.N + 1, mesh.y.N + 1, 2)
    return AdjointField(mesh, np.zeros(shape), t_anchor, ZERO)


# explicit Runge-Kutta tableaux (a, b, c) used for characteristic tracing
_TRACE_TABLEAUX = {
    1: ([[]], [1.0], [0.0]),
    2: ([[], [1.0]], [0.5, 0.5], [0.0, 1.0]),
    3: ([[], [1.0], [0.25, 0.25]], [1 / 6, 1 / 6, 2 / 3], [0.0, 1.0, 0.5]),
    4: (
        [[], [0.5], [0.0, 0.5], [0.0, 0.0, 1.0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
        [0.0, 0.5, 0.5, 1.0],
    ),
}


def trace_characteristic(
    velocity: VelocityField,
    start,
    t1: float,
    t0: float,
    order: int,
    substeps: int = 1,
    mesh: Optional[Mesh] = None,
):
    """Follow dx/dt = velocity backwards from (start, t1) to t0.

    `start` is an array of x in 1D or a pair (x, y) in 2D. When a mesh is
    given, periodic axes of the foot are wrapped into the domain.
    """
    if order not in _TRACE_TABLEAUX:
        raise ValueError("Tracing order must be 1..4, got %r" % (order,))
    if t0 > t1:
        raise ValueError("Backward tracing needs t0 <= t1")
    if substeps < 1:
        raise ValueError("substeps must be positive")
    a_tab, b_tab, c_tab = _TRACE_TABLEAUX[order]
    dim = velocity.dim
    state = np.array(start, dtype=float)

    def rhs(point: Array, t: float) -> Array:
        if dim == 1:
            return velocity(point, t=t)
        return np.stack(velocity(point[0], point[1], t=t))

    h = (t0 - t1) / substeps
    t = t1
    for _ in range(substeps):
        stages = []
        for i, row in enumerate(a_tab):
            point = state + h * sum(
                (coef * stage for coef, stage in zip(row, stages)), np.zeros_like(state)
            )
            stages.append(rhs(point, t + c_tab[i] * h))
        state = state + h * sum(
            (coef * stage for coef, stage in zip(b_tab, stages)), np.zeros_like(state)
        )
        t += h

    if mesh is None:
        return state
    if isinstance(mesh, Mesh1D):
        return wrap_periodic(state, mesh.x_lo, mesh.x_hi) if mesh.periodic else state
    x, y = state
    if mesh.x.periodic:
        x = wrap_periodic(x, mesh.x.x_lo, mesh.x.x_hi)
    if mesh.y.periodic:
        y = wrap_periodic(y, mesh.y.x_lo, mesh.y.x_hi)
    return np.stack([x, y])


def build_adjoint_st2(
    velocity: VelocityField,
    mesh: Mesh,
    t_anchor: float,
    dt: float,
    order: int,
    substeps: int = 1,
) -> AdjointField:
    """Vertex velocities as slopes of traced characteristic chords"""
    if dt <= 0:
        raise ValueError("Time step must be positive")
    vertices = mesh_vertices(mesh)
    if isinstance(mesh, Mesh1D):
        start = vertices[0]
        foot = trace_characteristic(
            velocity, start, t_anchor, t_anchor - dt, order, substeps
        )
        values = (start - foot) / dt
    else:
        start = np.stack(vertices)
        foot = trace_characteristic(
            velocity, start, t_anchor, t_anchor - dt, order, substeps
        )
        values = np.moveaxis((start - foot) / dt, 0, -1)
    values = np.array(values, dtype=float)
    if velocity.periodic:
        values = _share_seams(values, mesh)
    return AdjointField(mesh, values, t_anchor, ST2)


@dataclass(frozen=True)
class TimestepVerdict:
    ok: bool
    max_dt: float


def _min_jacobian(adjoint: AdjointField, dt: float, degree: int) -> float:
    maps = adjoint.maps(dt)
    tau = adjoint.t_anchor - dt
    if isinstance(maps, SpaceTimeMap1D):
        return float(np.min(maps.jacobian_local(0.0, tau)))
    nodes = gauss_rule(degree + 2).nodes
    lattice = np.concatenate([[-1.0, 1.0], nodes])
    r, s = np.meshgrid(lattice, lattice, indexing="ij")
    det = maps.jacobian_local(r.ravel(), s.ravel(), tau)[-1]
    return float(np.min(det))


def validate_timestep(
    adjoint: AdjointField, dt: float, degree: int = 2
) -> TimestepVerdict:
    """Check that the step keeps every upstream cell non-degenerate.

    On failure the verdict carries the largest dt / 2^m (m <= 20) that passes.
    """
    mesh = adjoint.mesh
    if isinstance(mesh, Mesh1D):
        growth = float(np.max(np.diff(adjoint.values)))
        if growth <= 0.0:
            return TimestepVerdict(True, dt)

        def passes(step: float) -> bool:
            return step * growth < mesh.dx * (1.0 - JACOBIAN_FLOOR)

    else:

        def passes(step: float) -> bool:
            return _min_jacobian(adjoint, step, degree) > JACOBIAN_FLOOR

    if passes(dt):
        return TimestepVerdict(True, dt)
    for m in range(1, MAX_HALVINGS + 1):
        trial = dt / 2**m
        if passes(trial):
            logger.debug(
                "time step %.6g fails distortion check, %.6g passes", dt, trial
            )
            return TimestepVerdict(False, trial)
    raise DistortionError(
        "No admissible time step after %d halvings of %.6g" % (MAX_HALVINGS, dt)
    )
