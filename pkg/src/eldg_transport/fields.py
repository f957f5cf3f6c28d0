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
Self-consistent fields of the nonlinear models and their invariants.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import fft

from .adjoint import VelocityField
from .consts import ENTROPY_FLOOR, MIN_COLLOCATION_POINTS, NEUTRALITY_TOLERANCE
from .errors import ConfigError, MeshError, NeutralityError
from .logger import logger
from .mesh import (
    DGField,
    Mesh1D,
    Mesh2D,
    gauss_lobatto_nodes,
    gauss_rule,
    sample_uniform_grid,
)

Array = np.ndarray

# Poisson equations: -lap(Phi) = rho (guiding center) or lap(Phi) = omega (Euler)
MINUS_LAPLACIAN = "-laplace"
LAPLACIAN = "+laplace"
GUIDING_CENTER = "guiding-center"
EULER = "euler"


def _legendre_to_orthonormal(series: Array) -> Array:
    return series / np.sqrt(2.0 * np.arange(series.shape[-1]) + 1.0)


def _orthonormal_to_legendre(coeffs: Array) -> Array:
    return coeffs * np.sqrt(2.0 * np.arange(coeffs.shape[-1]) + 1.0)


def charge_density(f: DGField, background: float = 1.0) -> DGField:
    """rho(x) = int f dv - background, exact from the modal coefficients"""
    mesh = f.mesh
    if not isinstance(mesh, Mesh2D):
        raise MeshError("Charge density needs a phase-space (x, v) mesh")
    basis = f.basis
    columns = [basis.index(a, 0) for a in range(f.degree + 1)]
    coeffs = mesh.dy * np.sum(f.coeffs[:, :, columns], axis=1)
    coeffs[:, 0] -= background
    return DGField(mesh.x, f.degree, coeffs, f.time)


@dataclass(frozen=True, eq=False)
class ElectricField1D:
    """Piecewise polynomial E(x) of degree k+1 with E' = rho in each cell.

    `series` holds plain Legendre series coefficients per cell, shape (N, k+2).
    """

    mesh: Mesh1D
    series: Array
    zero_mean: bool = True

    @property
    def degree(self) -> int:
        return self.series.shape[1] - 1

    def __call__(self, x: Array) -> Array:
        index, r = self.mesh.locate(x)
        vander = legendre.legvander(r, self.degree)
        return np.sum(self.series[index] * vander, axis=-1)

    def values_at(self, r: Array) -> Array:
        return self.series @ legendre.legvander(np.asarray(r, float), self.degree).T

    def mean(self) -> float:
        return float(np.mean(self.series[:, 0]))

    def energy(self) -> float:
        """int E^2 dx, exact"""
        weights = 1.0 / (2.0 * np.arange(self.degree + 1) + 1.0)
        return float(self.mesh.dx * np.sum(self.series**2 * weights))

    def max_abs(self) -> float:
        nodes = gauss_lobatto_nodes(self.degree + 2)
        return float(np.max(np.abs(self.values_at(nodes))))

    def scaled(self, factor: float) -> "ElectricField1D":
        return ElectricField1D(self.mesh, factor * self.series, self.zero_mean)


def _check_neutral(rho: DGField, tolerance: float) -> float:
    mean = rho.total_mass / rho.mesh.domain_measure
    if abs(mean) > tolerance:
        raise NeutralityError(
            "Charge density has mean %.3e, above tolerance %.1e" % (mean, tolerance)
        )
    return mean


def solve_poisson_1d(
    rho: DGField,
    tolerance: float = NEUTRALITY_TOLERANCE,
    remove_mean: bool = False,
) -> ElectricField1D:
    """E from E' = rho on a periodic line by exact cellwise antiderivatives.

    With `remove_mean` the (tolerated) mean charge is subtracted first.
    """
    mesh = rho.mesh
    if not isinstance(mesh, Mesh1D):
        raise MeshError("1D Poisson solve needs a 1D mesh")
    mean = _check_neutral(rho, tolerance)
    coeffs = np.array(rho.coeffs)
    if remove_mean:
        coeffs[:, 0] -= mean
    series = _orthonormal_to_legendre(coeffs)
    # antiderivative in r vanishing at r = -1, scaled by dx/2 for d/dx
    integral = 0.5 * mesh.dx * legendre.legint(series, lbnd=-1, axis=1)
    jumps = legendre.legval(1.0, integral.T)
    left_values = np.concatenate([[0.0], np.cumsum(jumps)[:-1]])
    integral[:, 0] += left_values
    weights = 1.0 / (2.0 * np.arange(integral.shape[1]) + 1.0)
    integral[:, 0] -= np.mean(integral[:, 0])
    logger.debug(
        "1D Poisson: closure %.3e, |E|^2 %.6g",
        float(np.sum(jumps)),
        float(mesh.dx * np.sum(integral**2 * weights)),
    )
    return ElectricField1D(mesh, integral, True)


def _wavenumbers(n: int, length: float) -> Array:
    kappa = 2.0 * np.pi * fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        kappa[n // 2] = 0.0
    return kappa


def _evaluation_matrix(kappa: Array, origin: float, points: Array) -> Array:
    """Rows evaluate a trigonometric interpolant from its (unnormalized) DFT"""
    return np.exp(1j * np.outer(points - origin, kappa)) / len(kappa)


class PotentialVelocityField(VelocityField):
    """Divergence-free velocity derived from a periodic spectral potential.

    The derivatives of Phi are evaluated exactly at Gauss-Lobatto tensor nodes
    of every cell and stored as tensor Legendre interpolants of degree k+1,
    so values on shared cell edges coincide.
    """

    def __init__(
        self,
        mesh: Mesh2D,
        degree: int,
        potential_hat: Array,
        orientation: str,
        origin: Tuple[float, float],
    ):
        self.mesh = mesh
        self.interp_degree = degree + 1
        self.potential_hat = potential_hat
        self.orientation = orientation
        nx, ny = potential_hat.shape
        self.kx = _wavenumbers(nx, mesh.x.length)
        self.ky = _wavenumbers(ny, mesh.y.length)
        phi_x_hat = 1j * self.kx[:, None] * potential_hat
        phi_y_hat = 1j * self.ky[None, :] * potential_hat
        sign = 1.0 if orientation == GUIDING_CENTER else -1.0
        self.velocity_hat = (-sign * phi_y_hat, sign * phi_x_hat)

        nodes = gauss_lobatto_nodes(self.interp_degree + 1)
        px = mesh.x.reference_to_physical(nodes).reshape(-1)
        py = mesh.y.reference_to_physical(nodes).reshape(-1)
        ex = _evaluation_matrix(self.kx, origin[0], px)
        ey = _evaluation_matrix(self.ky, origin[1], py)
        inverse = np.linalg.inv(legendre.legvander(nodes, self.interp_degree))
        m = len(nodes)
        tables = []
        for hat in self.velocity_hat:
            nodal = np.real(ex @ hat @ ey.T).reshape(mesh.x.N, m, mesh.y.N, m)
            nodal = nodal.transpose(0, 2, 1, 3)
            tables.append(np.einsum("am,bn,ijmn->ijab", inverse, inverse, nodal))
        self.tables = tuple(tables)

        grid = [np.real(fft.ifft2(hat)) for hat in self.velocity_hat]
        speeds = (float(np.max(np.abs(grid[0]))), float(np.max(np.abs(grid[1]))))
        super().__init__(
            self._evaluate,
            2,
            speeds,
            divergence_free=True,
            time_independent=True,
            periodic=True,
            name=orientation,
        )

    def _evaluate(self, x, y, t):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        ix, iy, r, s = self.mesh.locate(x, y)
        vx = legendre.legvander(r, self.interp_degree)
        vy = legendre.legvander(s, self.interp_degree)
        return tuple(
            np.einsum("...a,...b,...ab->...", vx, vy, table[ix, iy])
            for table in self.tables
        )

    def energy(self) -> float:
        """int |grad Phi|^2 over the domain, by Parseval"""
        nx, ny = self.potential_hat.shape
        k2 = self.kx[:, None] ** 2 + self.ky[None, :] ** 2
        total = np.sum(k2 * np.abs(self.potential_hat) ** 2)
        return float(self.mesh.domain_measure * total / (nx * ny) ** 2)

    def spectral_divergence(self) -> float:
        a_hat, b_hat = self.velocity_hat
        div = 1j * self.kx[:, None] * a_hat + 1j * self.ky[None, :] * b_hat
        return float(np.max(np.abs(fft.ifft2(div))))


def potential_from_samples(
    mesh: Mesh2D,
    degree: int,
    samples: Array,
    equation: str = MINUS_LAPLACIAN,
    orientation: str = GUIDING_CENTER,
) -> PotentialVelocityField:
    """Spectral Poisson solve from samples on the uniform (k+1)N grid.

    `samples` is indexed [ix, iy]; the zero mode of Phi is set to 0.
    """
    if equation not in (MINUS_LAPLACIAN, LAPLACIAN):
        raise ConfigError("Unknown Poisson equation %r" % (equation,))
    if orientation not in (GUIDING_CENTER, EULER):
        raise ConfigError("Unknown velocity orientation %r" % (orientation,))
    nx, ny = samples.shape
    if min(nx, ny) < MIN_COLLOCATION_POINTS:
        raise MeshError(
            "Collocation grid %dx%d too small, need at least %d points per axis"
            % (nx, ny, MIN_COLLOCATION_POINTS)
        )
    kx = _wavenumbers(nx, mesh.x.length)
    ky = _wavenumbers(ny, mesh.y.length)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    rho_hat = fft.fft2(samples)
    potential_hat = np.zeros_like(rho_hat)
    nonzero = k2 > 0
    potential_hat[nonzero] = rho_hat[nonzero] / k2[nonzero]
    if equation == LAPLACIAN:
        potential_hat = -potential_hat
    origin = (
        mesh.x.x_lo + 0.5 * mesh.x.length / nx,
        mesh.y.x_lo + 0.5 * mesh.y.length / ny,
    )
    return PotentialVelocityField(mesh, degree, potential_hat, orientation, origin)


def solve_poisson_2d_periodic(
    rho: DGField,
    equation: str = MINUS_LAPLACIAN,
    orientation: str = GUIDING_CENTER,
    tolerance: float = NEUTRALITY_TOLERANCE,
) -> PotentialVelocityField:
    """Velocity field of a periodic 2D Poisson problem for rho_h"""
    mesh = rho.mesh
    if not isinstance(mesh, Mesh2D):
        raise MeshError("2D Poisson solve needs a 2D mesh")
    if mesh.x.N * (rho.degree + 1) < MIN_COLLOCATION_POINTS or mesh.y.N * (
        rho.degree + 1
    ) < MIN_COLLOCATION_POINTS:
        raise MeshError("Mesh too small for a spectral solve at degree %d" % rho.degree)
    _check_neutral(rho, tolerance)
    _, _, grid = sample_uniform_grid(rho, rho.degree + 1)
    return potential_from_samples(mesh, rho.degree, grid.T, equation, orientation)


def reverse_velocity(f: DGField) -> DGField:
    """f(x, v) -> f(x, -v) on a v-symmetric phase-space mesh, exact"""
    mesh = f.mesh
    if not isinstance(mesh, Mesh2D):
        raise MeshError("Velocity reversal needs a phase-space mesh")
    if abs(mesh.y.x_lo + mesh.y.x_hi) > 1e-12 * mesh.y.length:
        raise MeshError("Velocity domain is not symmetric about v = 0")
    signs = np.array([(-1.0) ** b for _, b in f.basis.exponents])
    return f.replace(f.coeffs[:, ::-1, :] * signs)


@dataclass(frozen=True)
class Invariants:
    """Diagnostics of one solution state; unset entries are None"""

    mass: float
    l1: float
    l2: float
    linf: float
    energy: Optional[float] = None
    entropy: Optional[float] = None
    enstrophy: Optional[float] = None
    electric_energy: Optional[float] = None

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def _quadrature_values(state: DGField) -> Tuple[Array, Array]:
    """Values and weights (physical measure) at k+3 Gauss points per cell"""
    rule = gauss_rule(state.degree + 3)
    if state.dim == 1:
        r, s, w = rule.nodes, None, 0.5 * rule.weights
    else:
        r, s, w = rule.tensor()
        w = 0.25 * w
    return state.values_at(r, s), w * state.mesh.cell_area


def _entropy(values: Array, weights: Array) -> float:
    """Integral of f log f, skipping |f| < ENTROPY_FLOOR"""
    safe = np.maximum(values, ENTROPY_FLOOR)
    density = np.where(np.abs(values) < ENTROPY_FLOOR, 0.0, values * np.log(safe))
    return float(np.sum(density * weights))


def invariants(
    state: DGField,
    model: Optional[str] = None,
    field: Optional[object] = None,
) -> Invariants:
    """Mass, norms and the model's physical invariants.

    `field` may supply an already-solved E or potential velocity for the
    state; otherwise it is solved here.
    """
    values, weights = _quadrature_values(state)
    mass = state.total_mass
    l1 = float(np.sum(np.abs(values) * weights))
    l2 = float(np.sqrt(state.mesh.cell_area * np.sum(state.coeffs**2)))
    samples = np.linspace(-1.0, 1.0, state.degree + 4)
    if state.dim == 1:
        linf = float(np.max(np.abs(state.values_at(samples))))
    else:
        rr, ss = np.meshgrid(samples, samples, indexing="ij")
        linf = float(np.max(np.abs(state.values_at(rr.ravel(), ss.ravel()))))
    if model is None:
        return Invariants(mass, l1, l2, linf)
    if model == "vp":
        electric = field
        if electric is None:
            electric = solve_poisson_1d(
                charge_density(state), tolerance=1e-6, remove_mean=True
            )
        assert isinstance(electric, ElectricField1D)
        rule = gauss_rule(state.degree + 3)
        _, s, _ = rule.tensor()
        vs = state.mesh.y.reference_to_physical(s)  # type: ignore[union-attr]
        v = vs[None, :, :]
        kinetic = float(np.sum(values * v**2 * weights))
        electric_energy = electric.energy()
        return Invariants(
            mass,
            l1,
            l2,
            linf,
            energy=kinetic + electric_energy,
            entropy=_entropy(values, weights),
            electric_energy=electric_energy,
        )
    if model in ("gc", "euler"):
        velocity = field
        if velocity is None:
            equation = MINUS_LAPLACIAN if model == "gc" else LAPLACIAN
            orientation = GUIDING_CENTER if model == "gc" else EULER
            velocity = solve_poisson_2d_periodic(state, equation, orientation, 1e-6)
        assert isinstance(velocity, PotentialVelocityField)
        return Invariants(
            mass,
            l1,
            l2,
            linf,
            energy=velocity.energy(),
            entropy=_entropy(values, weights),
            enstrophy=l2 * l2,
        )
    raise ConfigError("Unknown model %r" % (model,))
