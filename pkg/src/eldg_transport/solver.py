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
One-step ELDG update and its SLDG / RKDG degenerate modes.

A step marches the weighted moments W = M(t) u of the moving-frame weak form
d/dt W = L(u, t) with an SSP Runge-Kutta method. The stage maps are anchored
at t^{n+1}, where the mass matrix is the identity.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import legendre

from .adjoint import (
    AdjointField,
    VelocityField,
    VertexSampler,
    build_adjoint_st1,
    build_adjoint_st2,
    validate_timestep,
    zero_adjoint,
)
from .consts import CONDITION_BOUND, MAX_HALVINGS, MODES, SLDG_MODE
from .errors import (
    ConfigError,
    DistortionError,
    GeometryError,
    MapDegenerateError,
    MassMatrixError,
    NonFiniteError,
    StepRejected,
)
from .geometry import (
    Polygon,
    SpaceTimeMap1D,
    SpaceTimeMap2D,
    clip_interval,
    clip_pieces,
    green_rule,
    wrap_index,
)
from .logger import logger
from .mesh import (
    DGField,
    Mesh,
    Mesh1D,
    Mesh2D,
    gauss_lobatto_nodes,
    gauss_rule,
    get_basis,
)

Array = np.ndarray

_EDGE_CHUNK = 20000


@dataclass(frozen=True, eq=False)
class RKTableau:
    """SSP Runge-Kutta method in Shu-Osher form.

    Row i-1 of `alpha`/`beta` builds stage i from stages 0..i-1; `d[l]` is the
    time abscissa of stage l.
    """

    name: str
    alpha: Tuple[Tuple[float, ...], ...]
    beta: Tuple[Tuple[float, ...], ...]
    d: Tuple[float, ...]

    def __post_init__(self):
        if len(self.alpha) != len(self.beta) or len(self.d) != len(self.alpha):
            raise ValueError("Inconsistent tableau sizes for %s" % self.name)
        for i, (arow, brow) in enumerate(zip(self.alpha, self.beta)):
            if len(arow) != i + 1 or len(brow) != i + 1:
                raise ValueError("Tableau %s is not lower triangular" % self.name)
            if abs(sum(arow) - 1.0) > 1e-14:
                raise ValueError("Tableau %s row %d is not convex" % (self.name, i))
            if min(arow) < 0 or min(brow) < 0:
                raise ValueError("Tableau %s has negative coefficients" % self.name)
        if self.d[0] != 0.0:
            raise ValueError("First stage of %s must start at t^n" % self.name)

    @property
    def stages(self) -> int:
        return len(self.alpha)


FORWARD_EULER = RKTableau("forward-euler", ((1.0,),), ((1.0,),), (0.0,))
SSP_RK2 = RKTableau(
    "ssp-rk2",
    ((1.0,), (0.5, 0.5)),
    ((1.0,), (0.0, 0.5)),
    (0.0, 1.0),
)
SSP_RK3 = RKTableau(
    "ssp-rk3",
    ((1.0,), (0.75, 0.25), (1.0 / 3.0, 0.0, 2.0 / 3.0)),
    ((1.0,), (0.0, 0.25), (0.0, 0.0, 2.0 / 3.0)),
    (0.0, 1.0, 0.5),
)
TABLEAUX = {t.name: t for t in (FORWARD_EULER, SSP_RK2, SSP_RK3)}


def default_tableau(degree: int) -> RKTableau:
    return SSP_RK2 if degree <= 1 else SSP_RK3


@dataclass(frozen=True)
class StepConfig:
    mode: str = "eldg-st1"
    tableau: Optional[RKTableau] = None
    trace_order: Optional[int] = None
    trace_substeps: int = 1
    max_halvings: int = MAX_HALVINGS
    vertex_sampler: Optional[VertexSampler] = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(
                "Unknown mode %r, expected one of %s" % (self.mode, ", ".join(MODES))
            )

    def tableau_for(self, degree: int) -> RKTableau:
        return self.tableau or default_tableau(degree)

    def order_for(self, degree: int) -> int:
        return self.trace_order or min(degree + 1, 4)


@dataclass(frozen=True, eq=False)
class StageState:
    """Weighted moments W_j = M_j(tau) u_j at stage time tau"""

    moments: Array
    time: float


def lax_friedrichs_flux(f_minus, f_plus, u_minus, u_plus, alpha0):
    """Lax-Friedrichs numerical flux F = (F- + F+)/2 - alpha0 (u+ - u-)/2"""
    return 0.5 * (f_minus + f_plus) - 0.5 * alpha0 * (u_plus - u_minus)


Residual = Callable[[Array, float], Array]
MassSolve = Callable[[Array, float], Array]


def rk_advance(
    initial: Union[StageState, Array],
    tableau: RKTableau,
    residual: Residual,
    solve_mass: MassSolve,
    t_n: float,
    dt: float,
) -> Array:
    """March W = M u over one step and return the coefficients at t^{n+1}"""
    moments0 = initial.moments if isinstance(initial, StageState) else initial
    moments = [np.asarray(moments0, dtype=float)]
    states = [solve_mass(moments[0], t_n + tableau.d[0] * dt)]
    rates: Dict[int, Array] = {}

    def rate(l: int) -> Array:
        if l not in rates:
            rates[l] = residual(states[l], t_n + tableau.d[l] * dt)
        return rates[l]

    for i in range(1, tableau.stages + 1):
        arow, brow = tableau.alpha[i - 1], tableau.beta[i - 1]
        update = np.zeros_like(moments[0])
        for l, (a_il, b_il) in enumerate(zip(arow, brow)):
            if a_il:
                update = update + a_il * moments[l]
            if b_il:
                update = update + (b_il * dt) * rate(l)
        moments.append(update)
        if i < tableau.stages:
            states.append(solve_mass(update, t_n + tableau.d[i] * dt))
    return moments[-1]


class Transport1D:
    """Upstream projection, mass solve and residual on a 1D mesh"""

    def __init__(
        self,
        mesh: Mesh1D,
        degree: int,
        velocity: VelocityField,
        adjoint: AdjointField,
        dt: float,
    ):
        self.mesh = mesh
        self.degree = degree
        self.velocity = velocity
        self.adjoint = adjoint
        self.dt = dt
        self.t_anchor = adjoint.t_anchor
        self.maps: SpaceTimeMap1D = adjoint.maps(dt)  # type: ignore[assignment]
        self.basis = get_basis(degree, 1)
        rule = gauss_rule(degree + 2)
        self.nodes, self.weights = rule.nodes, rule.weights
        self.phi = self.basis.evaluate(self.nodes)
        self.dphi = self.basis.gradient(self.nodes)
        self.phi_left = self.basis.evaluate(-1.0)
        self.phi_right = self.basis.evaluate(1.0)

    def jacobian(self, tau: float) -> Array:
        return self.maps.jacobian_local(0.0, tau)

    def solve_mass(self, moments: Array, tau: float) -> Array:
        if tau == self.t_anchor:
            return moments
        jac = self.jacobian(tau)
        if np.any(jac <= 0.0):
            raise MassMatrixError("Non-positive mass matrix at tau=%r" % tau)
        return moments / jac[:, None]

    def residual(self, coeffs: Array, tau: float) -> Array:
        maps = self.maps
        x = maps.map_local(self.nodes, tau)
        rel = self.velocity(x, t=tau) - maps.velocity_local(self.nodes)
        values = coeffs @ self.phi.T
        volume = (rel * values * self.weights) @ self.dphi

        x_edge = maps.map_local(1.0, tau)
        rel_edge = self.velocity(x_edge, t=tau) - np.asarray(maps.nu_right)
        u_minus = coeffs @ self.phi_right
        u_plus = np.roll(coeffs, -1, axis=0) @ self.phi_left
        flux = lax_friedrichs_flux(
            rel_edge * u_minus, rel_edge * u_plus, u_minus, u_plus, np.abs(rel_edge)
        )
        flux_left = np.roll(flux, 1)
        edges = -np.outer(flux, self.phi_right) + np.outer(flux_left, self.phi_left)
        return (volume + edges) / self.mesh.dx

    def project_upstream(self, field: DGField) -> Array:
        """Cell moments of u^n against the test functions at t^n"""
        if self.adjoint.is_zero:
            return np.array(field.coeffs)
        mesh = self.mesh
        lefts, rights = self.maps.upstream_interval()
        moments = np.zeros_like(field.coeffs)
        for j in range(mesh.N):
            left, right = float(lefts[j]), float(rights[j])
            for cell, lo, hi in clip_interval(left, right, mesh):
                source, _ = wrap_index(cell, mesh)
                xq = lo + 0.5 * (self.nodes + 1.0) * (hi - lo)
                wq = 0.5 * self.weights * (hi - lo)
                center = mesh.x_lo + (cell + 0.5) * mesh.dx
                local = 2.0 * (xq - center) / mesh.dx
                u_vals = self.basis.evaluate(local) @ field.coeffs[source]
                psi = self.basis.evaluate(2.0 * (xq - left) / (right - left) - 1.0)
                moments[j] += (wq * u_vals) @ psi
        return moments / mesh.dx


@dataclass(frozen=True, eq=False)
class TestPolynomial:
    """Tensor Legendre polynomials p*_p in scaled coordinates around `center`"""

    center: Array
    half_widths: Tuple[float, float]
    coeffs: Array
    degree: int

    def __call__(self, x: Array, y: Array) -> Array:
        """Values of all p*_p for a single-cell polynomial, shape (..., n_k)"""
        xs = (np.asarray(x, float) - self.center[0]) / self.half_widths[0]
        ys = (np.asarray(y, float) - self.center[1]) / self.half_widths[1]
        vx = legendre.legvander(xs, self.degree)
        vy = legendre.legvander(ys, self.degree)
        return np.einsum("...a,...b,abn->...n", vx, vy, self.coeffs)


def reconstruct_test_polynomial(
    maps: SpaceTimeMap2D, degree: int, tau: Optional[float] = None
) -> TestPolynomial:
    """Interpolate the basis at the images of Gauss-Lobatto nodes.

    Works on single-cell or mesh-wide maps; coefficients have shape
    cell_shape + (k+1, k+1, n_k).
    """
    tau = maps.t_anchor - maps.dt if tau is None else tau
    nodes = gauss_lobatto_nodes(degree + 1)
    rr, ss = np.meshgrid(nodes, nodes, indexing="ij")
    rr, ss = rr.ravel(), ss.ravel()
    x, y = maps.map_local(rr, ss, tau)
    cx, cy = (np.asarray(c, float) for c in maps.map_local(0.0, 0.0, tau))
    half = (0.5 * maps.hx, 0.5 * maps.hy)
    vx = legendre.legvander((x - cx[..., None]) / half[0], degree)
    vy = legendre.legvander((y - cy[..., None]) / half[1], degree)
    size = degree + 1
    vander = (vx[..., :, :, None] * vy[..., :, None, :]).reshape(
        x.shape + (size * size,)
    )
    cond = np.linalg.cond(vander)
    if np.any(~np.isfinite(cond)) or np.any(cond > CONDITION_BOUND):
        raise MapDegenerateError(
            "Test polynomial interpolation is ill-conditioned (cond %.3e)"
            % float(np.nanmax(np.where(np.isfinite(cond), cond, np.inf)))
        )
    rhs = get_basis(degree, 2).evaluate(rr, ss)
    rhs = np.broadcast_to(rhs, vander.shape[:-1] + rhs.shape[-1:])
    coeffs = np.linalg.solve(vander, rhs)
    coeffs = coeffs.reshape(vander.shape[:-2] + (size, size, rhs.shape[-1]))
    center = np.stack([cx, cy], axis=-1)
    return TestPolynomial(center, half, coeffs, degree)


class Transport2D:
    """Upstream projection, mass solve and residual on a 2D mesh"""

    def __init__(
        self,
        mesh: Mesh2D,
        degree: int,
        velocity: VelocityField,
        adjoint: AdjointField,
        dt: float,
    ):
        if not all(mesh.periodic):
            raise ConfigError("Transport needs periodic boundaries on both axes")
        self.mesh = mesh
        self.degree = degree
        self.velocity = velocity
        self.adjoint = adjoint
        self.dt = dt
        self.t_anchor = adjoint.t_anchor
        self.maps: SpaceTimeMap2D = adjoint.maps(dt)  # type: ignore[assignment]
        self.basis = get_basis(degree, 2)
        rule = gauss_rule(degree + 2)
        self.r, self.s, self.w = rule.tensor()
        self.phi = self.basis.evaluate(self.r, self.s)
        self.phi_r, self.phi_s = self.basis.gradient(self.r, self.s)
        self.edge_nodes, self.edge_weights = rule.nodes, rule.weights
        ones = np.ones_like(rule.nodes)
        self.phi_right = self.basis.evaluate(ones, rule.nodes)
        self.phi_left = self.basis.evaluate(-ones, rule.nodes)
        self.phi_top = self.basis.evaluate(rule.nodes, ones)
        self.phi_bottom = self.basis.evaluate(rule.nodes, -ones)

    def mass_matrix(self, tau: float) -> Array:
        det = self.maps.jacobian_local(self.r, self.s, tau)[-1]
        return 0.25 * np.einsum("ijq,qm,qn->ijmn", det * self.w, self.phi, self.phi)

    def solve_mass(self, moments: Array, tau: float) -> Array:
        if tau == self.t_anchor:
            return moments
        matrix = self.mass_matrix(tau)
        try:
            np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            raise MassMatrixError(
                "Stage mass matrix not positive definite at tau=%r" % tau
            )
        return np.linalg.solve(matrix, moments[..., None])[..., 0]

    def _relative_velocity(self, r: Array, s: Array, tau: float) -> Tuple[Array, Array]:
        x, y = self.maps.map_local(r, s, tau)
        a, b = self.velocity(x, y, t=tau)
        alpha, beta = self.maps.velocity_local(r, s)
        return a - alpha, b - beta

    def _edge_flux(
        self, r: Array, s: Array, tau: float, normal: int, u_minus: Array, u_plus: Array
    ) -> Array:
        """Flux through right (normal=0) or top (normal=1) cell edges.

        Weighted by the scaled normal det J * J^{-T} n of the reference edge.
        """
        va, vb = self._relative_velocity(r, s, tau)
        j11, j12, j21, j22, _ = self.maps.jacobian_local(r, s, tau)
        if normal == 0:
            nx, ny = j22, -j12
        else:
            nx, ny = -j21, j11
        speed = va * nx + vb * ny
        length = np.hypot(nx, ny)
        alpha0 = np.max(np.abs(speed) / length, axis=-1, keepdims=True)
        return lax_friedrichs_flux(
            speed * u_minus, speed * u_plus, u_minus, u_plus, alpha0 * length
        )

    def residual(self, coeffs: Array, tau: float) -> Array:
        hx, hy = self.mesh.dx, self.mesh.dy
        va, vb = self._relative_velocity(self.r, self.s, tau)
        j11, j12, j21, j22, _ = self.maps.jacobian_local(self.r, self.s, tau)
        values = coeffs @ self.phi.T
        # F . (adj J) grad psi with adj J = det J * J^{-T}
        px = va * j22 - vb * j12
        py = -va * j21 + vb * j11
        weighted = values * self.w
        volume = 0.25 * (
            (weighted * px) @ (self.phi_r * (2.0 / hx))
            + (weighted * py) @ (self.phi_s * (2.0 / hy))
        )

        nodes = self.edge_nodes
        ones = np.ones_like(nodes)
        u_minus = coeffs @ self.phi_right.T
        u_plus = np.roll(coeffs, -1, axis=0) @ self.phi_left.T
        flux_x = self._edge_flux(ones, nodes, tau, 0, u_minus, u_plus)
        u_minus = coeffs @ self.phi_top.T
        u_plus = np.roll(coeffs, -1, axis=1) @ self.phi_bottom.T
        flux_y = self._edge_flux(nodes, ones, tau, 1, u_minus, u_plus)

        wx = flux_x * self.edge_weights
        wy = flux_y * self.edge_weights
        edges = (wx @ self.phi_right - np.roll(wx, 1, axis=0) @ self.phi_left) / (
            2.0 * hx
        ) + (wy @ self.phi_top - np.roll(wy, 1, axis=1) @ self.phi_bottom) / (2.0 * hy)
        return volume - edges

    def project_upstream(self, field: DGField) -> Array:
        """Moments of u^n over clipped upstream pieces against p*_p"""
        if self.adjoint.is_zero:
            return np.array(field.coeffs)
        mesh = self.mesh
        k = self.degree
        nx, ny = mesh.cell_shape
        tau = self.t_anchor - self.dt
        test = reconstruct_test_polynomial(self.maps, k, tau)
        corner_x, corner_y = self.maps.corners(tau)

        starts: List[Tuple[float, float]] = []
        ends: List[Tuple[float, float]] = []
        records: List[Tuple[int, int, int]] = []
        check = logger.isEnabledFor(logging.DEBUG)
        for jx in range(nx):
            for jy in range(ny):
                quad = list(zip(corner_x[jx, jy].tolist(), corner_y[jx, jy].tolist()))
                if check and not Polygon(np.asarray(quad)).is_simple():
                    raise GeometryError(
                        "Upstream quadrilateral of cell %r self-intersects"
                        % ((jx, jy),)
                    )
                target = jx * ny + jy
                for bx, by, points in clip_pieces(quad, mesh):
                    count = len(points)
                    for i in range(count):
                        starts.append(points[i])
                        ends.append(points[(i + 1) % count])
                        records.append((target, bx, by))
        if not records:
            raise DistortionError("Upstream projection produced no pieces")
        info = np.asarray(records, dtype=np.int64)
        starts_arr = np.asarray(starts)
        ends_arr = np.asarray(ends)
        size = k + 1
        moments = np.zeros((nx * ny, size * size))
        centers = test.center.reshape(-1, 2)
        for lo in range(0, len(info), _EDGE_CHUNK):
            hi = min(lo + _EDGE_CHUNK, len(info))
            self._accumulate(
                field,
                starts_arr[lo:hi],
                ends_arr[lo:hi],
                info[lo:hi],
                centers,
                test.half_widths,
                moments,
            )
        coeffs = test.coeffs.reshape(nx * ny, size * size, -1)
        result = np.einsum("jc,jcn->jn", moments, coeffs) / mesh.cell_area
        logger.debug("upstream projection over %d edges", len(info))
        return result.reshape(mesh.cell_shape + (-1,))

    def _accumulate(self, field, starts, ends, info, centers, half, moments) -> None:
        mesh = self.mesh
        k = self.degree
        hx, hy = mesh.dx, mesh.dy
        target, bx, by = info[:, 0], info[:, 1], info[:, 2]
        origins = mesh.x.x_lo + bx * hx
        points, weights = green_rule(starts, ends, origins, 3 * k)
        per_edge = weights.shape[1] * weights.shape[2]
        px = points[..., 0].reshape(-1)
        py = points[..., 1].reshape(-1)
        wts = weights.reshape(-1)
        target = np.repeat(target, per_edge)
        bx = np.repeat(bx, per_edge)
        by = np.repeat(by, per_edge)

        # u^n in the (unwrapped) background cell
        rs = 2.0 * (px - (mesh.x.x_lo + (bx + 0.5) * hx)) / hx
        ss = 2.0 * (py - (mesh.y.x_lo + (by + 0.5) * hy)) / hy
        sx = np.mod(bx, mesh.x.N)
        sy = np.mod(by, mesh.y.N)
        u_vals = np.sum(field.coeffs[sx, sy] * self.basis.evaluate(rs, ss), axis=-1)

        xs = (px - centers[target, 0]) / half[0]
        ys = (py - centers[target, 1]) / half[1]
        vx = legendre.legvander(xs, k)
        vy = legendre.legvander(ys, k)
        contrib = wts * u_vals
        count = moments.shape[0]
        for a in range(k + 1):
            for b in range(k + 1):
                moments[:, a * (k + 1) + b] += np.bincount(
                    target, weights=contrib * vx[:, a] * vy[:, b], minlength=count
                )


Transport = Union[Transport1D, Transport2D]


def make_transport(
    mesh: Mesh, degree: int, velocity: VelocityField, adjoint: AdjointField, dt: float
) -> Transport:
    if isinstance(mesh, Mesh1D):
        return Transport1D(mesh, degree, velocity, adjoint, dt)
    return Transport2D(mesh, degree, velocity, adjoint, dt)


def sl_project_upstream(
    field: DGField, adjoint: AdjointField, velocity: VelocityField, dt: float
) -> StageState:
    """SLDG projection of u^n onto the test functions of the step"""
    transport = make_transport(field.mesh, field.degree, velocity, adjoint, dt)
    return StageState(transport.project_upstream(field), adjoint.t_anchor - dt)


def mass_matrix(adjoint: AdjointField, dt: float, tau: float, degree: int) -> Array:
    """Per-cell mass matrices M(tau), shape cell_shape + (n_k, n_k)"""
    mesh = adjoint.mesh
    if isinstance(mesh, Mesh1D):
        jac = adjoint.maps(dt).jacobian_local(0.0, tau)
        return jac[:, None, None] * np.eye(degree + 1)
    maps = adjoint.maps(dt)
    rule = gauss_rule(degree + 2)
    r, s, w = rule.tensor()
    phi = get_basis(degree, 2).evaluate(r, s)
    det = maps.jacobian_local(r, s, tau)[-1]
    return 0.25 * np.einsum("ijq,qm,qn->ijmn", det * w, phi, phi)


def build_adjoint(
    velocity: VelocityField,
    mesh: Mesh,
    t_anchor: float,
    dt: float,
    degree: int,
    config: StepConfig,
) -> AdjointField:
    if config.mode == "rkdg":
        return zero_adjoint(mesh, t_anchor)
    if config.mode == "eldg-st2":
        return build_adjoint_st2(
            velocity,
            mesh,
            t_anchor,
            dt,
            config.order_for(degree),
            config.trace_substeps,
        )
    return build_adjoint_st1(velocity, mesh, t_anchor, config.vertex_sampler)


def eldg_step(
    field: DGField,
    velocity: VelocityField,
    t_n: float,
    dt: float,
    config: StepConfig = StepConfig(),
) -> DGField:
    """Advance u^n by one step of the configured mode.

    Every mode starts from the L2 projection of u^n onto the straight-edged
    upstream cells. The semi-Lagrangian DG mode (`sldg`) stops there; the
    ELDG modes and `rkdg` (zero adjoint) then run the SSP-RK stages on the
    moving-frame residual.

    Raises StepRejected when dt distorts the upstream cells.
    """
    if dt <= 0:
        raise ValueError("Time step must be positive, got %r" % dt)
    t_anchor = t_n + dt
    adjoint = build_adjoint(velocity, field.mesh, t_anchor, dt, field.degree, config)
    if not adjoint.is_zero:
        verdict = validate_timestep(adjoint, dt, field.degree)
        if not verdict.ok:
            raise StepRejected(dt, verdict.max_dt)
    transport = make_transport(field.mesh, field.degree, velocity, adjoint, dt)
    moments = transport.project_upstream(field)
    if config.mode == SLDG_MODE:
        # semi-Lagrangian DG: the upstream projection is the update
        coeffs = moments
    else:
        coeffs = rk_advance(
            moments,
            config.tableau_for(field.degree),
            transport.residual,
            transport.solve_mass,
            t_n,
            dt,
        )
    return field.replace(coeffs, t_anchor)


def cfl_time_step(mesh: Mesh, cfl: float, speeds: Sequence[float]) -> float:
    """dt = CFL * dx in 1D, CFL / (a/dx + b/dy) in 2D"""
    if cfl <= 0:
        raise ValueError("CFL must be positive")
    if isinstance(mesh, Mesh1D):
        return cfl * mesh.dx
    rate = abs(speeds[0]) / mesh.dx + abs(speeds[1]) / mesh.dy
    if rate <= 0.0:
        return cfl * min(mesh.dx, mesh.dy)
    return cfl / rate


StepCallback = Callable[[float, DGField], None]


def march(
    field: DGField,
    velocity: VelocityField,
    final_time: float,
    cfl: float,
    config: StepConfig = StepConfig(),
    stop_times: Sequence[float] = (),
    callback: Optional[StepCallback] = None,
) -> DGField:
    """Advance a linear problem to final_time with CFL-based steps"""
    nominal = cfl_time_step(field.mesh, cfl, velocity.max_speeds())
    return advance_until(
        field,
        final_time,
        lambda u, t, dt: eldg_step(u, velocity, t, dt, config),
        lambda u, t: nominal,
        stop_times,
        callback,
        config.max_halvings,
    )


def advance_until(
    field: DGField,
    final_time: float,
    step: Callable[[DGField, float, float], DGField],
    propose: Callable[[DGField, float], float],
    stop_times: Sequence[float] = (),
    callback: Optional[StepCallback] = None,
    max_halvings: int = MAX_HALVINGS,
) -> DGField:
    """Generic time loop with exact landing on stop times and step halving.

    A rejected step is retried with half the step up to `max_halvings` times;
    with 0 the first rejection raises `DistortionError`.
    """
    if final_time <= field.time:
        raise ValueError("Final time must exceed the start time")
    targets = sorted(t for t in stop_times if field.time < t < final_time)
    targets.append(final_time)
    t = field.time
    u = field
    steps = 0
    tol = 1e-12 * max(abs(final_time), 1.0)
    for target in targets:
        while target - t > tol:
            dt = min(propose(u, t), target - t)
            landing = target - t - dt <= tol
            for attempt in range(max_halvings + 1):
                try:
                    nxt = step(u, t, dt)
                    break
                except StepRejected as rejection:
                    logger.warning(
                        "step at t=%.6g rejected (dt=%.6g), halving", t, rejection.dt
                    )
                    dt *= 0.5
                    landing = False
            else:
                raise DistortionError(
                    "Step at t=%.6g still rejected after %d halvings"
                    % (t, max_halvings)
                )
            t = target if landing else t + dt
            u = nxt.replace(time=t)
            steps += 1
            if not u.is_finite():
                raise NonFiniteError("Non-finite solution at t=%.6g" % t)
            if callback is not None:
                callback(t, u)
    logger.info("reached t=%.6g in %d steps", t, steps)
    return u
