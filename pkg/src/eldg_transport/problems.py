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
Catalog of benchmark transport problems
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .adjoint import VelocityField
from .errors import ConfigError
from .mesh import DGField, Mesh, Mesh1D, build_mesh, project_function

Array = np.ndarray

# reference kinds for error measurement
EXACT = "exact"
INITIAL = "initial"
REVERSAL = "reversal"
SELF = "self"

SWIRL_PERIOD = 1.5
KH_WAVENUMBER = 0.5
KH_AMPLITUDE = 0.015
SHEAR_DELTA = 0.05
SHEAR_WIDTH = np.pi / 15
LANDAU_ALPHA = 0.5
LANDAU_WAVENUMBER = 0.5
BELL_RADIUS = 0.3 * np.pi
BELL_CENTER = (0.3 * np.pi, 0.0)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A benchmark: domain, initial data, transport and its reference.

    Linear problems carry a `velocity`; nonlinear ones name their `model`.
    """

    name: str
    dim: int
    bounds: Tuple[Tuple[float, float], ...]
    initial: Callable[..., Array]
    final_time: float
    reference: str
    description: str = ""
    velocity: Optional[VelocityField] = None
    model: Optional[str] = None
    exact: Optional[Callable[..., Array]] = None
    vertex_sampler: Optional[Callable[[Mesh, float], Array]] = None
    invariants: Tuple[str, ...] = ("mass", "l2")
    cfl: Tuple[float, ...] = (0.3, 0.18, 0.1)
    default_mesh: int = 40
    long_time: Optional[float] = None
    long_time_cfl: Optional[float] = None

    @property
    def nonlinear(self) -> bool:
        return self.model is not None

    def cfl_for(self, degree: int) -> float:
        return self.cfl[min(degree, len(self.cfl)) - 1]

    def mesh(self, n: int) -> Mesh:
        return build_mesh(self.bounds, n)

    def project_initial(self, mesh: Mesh, degree: int) -> DGField:
        return project_function(self.initial, mesh, degree)

    def exact_at(self, t: float) -> Callable[..., Array]:
        """Pointwise reference solution at time t"""
        if self.exact is not None:
            exact = self.exact
            if self.dim == 1:
                return lambda x: exact(x, t)
            return lambda x, y: exact(x, y, t)
        if self.reference == INITIAL and abs(t - self.final_time) <= 1e-12 * max(
            1.0, self.final_time
        ):
            return self.initial
        raise ConfigError("Problem %r has no exact solution at t=%g" % (self.name, t))


def _sine(x):
    return np.sin(x)


def _sine_exact(x, t):
    return np.sin(x - t)


def _unit(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _sine_velocity_exact(x, t):
    """Solution of u_t + (sin(x) u)_x = 0 with u(x, 0) = 1.

    Written as 2 e^{-t} / ((1 + cos x) + e^{-2t} (1 - cos x)) so that it stays
    finite at x = 0 and x = pi.
    """
    c = np.cos(x)
    decay = np.exp(-t)
    return 2.0 * decay / ((1.0 + c) + decay**2 * (1.0 - c))


def cosine_bell(x, y):
    dist = np.hypot(x - BELL_CENTER[0], y - BELL_CENTER[1])
    inside = dist < BELL_RADIUS
    return np.where(
        inside,
        BELL_RADIUS
        * np.cos(np.minimum(dist, BELL_RADIUS) / (2 * BELL_RADIUS) * np.pi) ** 6,
        0.0,
    )


def _rotation_exact(x, y, t):
    c, s = np.cos(t), np.sin(t)
    return cosine_bell(x * c + y * s, -x * s + y * c)


def _swirl_strength(t):
    return np.cos(np.pi * t / SWIRL_PERIOD) * np.pi


def _swirl(x, y, t):
    g = _swirl_strength(t)
    return (
        -np.cos(0.5 * x) ** 2 * np.sin(y) * g,
        np.sin(x) * np.cos(0.5 * y) ** 2 * g,
    )


def _landau(x, v):
    return (
        (1.0 + LANDAU_ALPHA * np.cos(LANDAU_WAVENUMBER * x))
        * np.exp(-0.5 * v**2)
        / np.sqrt(2.0 * np.pi)
    )


def _gc_stationary(x, y):
    return -2.0 * np.sin(x) * np.sin(y)


def _gc_stationary_exact(x, y, t):
    return _gc_stationary(x, y)


def _kelvin_helmholtz(x, y):
    return np.sin(y) + KH_AMPLITUDE * np.cos(KH_WAVENUMBER * x)


def _sech2(z):
    return 1.0 / np.cosh(z) ** 2


def _double_shear(x, y):
    wave = SHEAR_DELTA * np.cos(x)
    lower = wave - _sech2((y - 0.5 * np.pi) / SHEAR_WIDTH) / SHEAR_WIDTH
    upper = wave + _sech2((1.5 * np.pi - y) / SHEAR_WIDTH) / SHEAR_WIDTH
    return np.where(y <= np.pi, lower, upper)


def perturbed_vertex_sampler(mesh: Mesh, t: float) -> Array:
    """Adjoint vertex values 1 + sin(x_{j+1/2}) dx for unit advection"""
    assert isinstance(mesh, Mesh1D)
    return 1.0 + np.sin(mesh.edges) * mesh.dx


TWO_PI = 2.0 * np.pi
UNIT_SPEED = VelocityField(
    lambda x, t: 1.0, 1, (1.0,), time_independent=True, name="unit"
)


def _build_catalog() -> Dict[str, ProblemSpec]:
    line = ((0.0, TWO_PI),)
    square = ((-np.pi, np.pi), (-np.pi, np.pi))
    periodic_square = ((0.0, TWO_PI), (0.0, TWO_PI))
    problems = [
        ProblemSpec(
            "advect1d-const",
            1,
            line,
            _sine,
            np.pi,
            EXACT,
            "u_t + u_x = 0, u0 = sin(x)",
            velocity=UNIT_SPEED,
            exact=_sine_exact,
            long_time=100.0,
        ),
        ProblemSpec(
            "advect1d-perturbed",
            1,
            line,
            _sine,
            np.pi,
            EXACT,
            "u_t + u_x = 0 with perturbed adjoint vertex velocities",
            velocity=UNIT_SPEED,
            exact=_sine_exact,
            vertex_sampler=perturbed_vertex_sampler,
            long_time=100.0,
        ),
        ProblemSpec(
            "advect1d-sine",
            1,
            line,
            _unit,
            1.0,
            EXACT,
            "u_t + (sin(x) u)_x = 0, u0 = 1",
            velocity=VelocityField(
                lambda x, t: np.sin(x),
                1,
                (1.0,),
                divergence_free=False,
                time_independent=True,
                name="sine",
            ),
            exact=_sine_velocity_exact,
        ),
        ProblemSpec(
            "rigid-rotation",
            2,
            square,
            cosine_bell,
            TWO_PI,
            EXACT,
            "u_t - (y u)_x + (x u)_y = 0 with a cosine bell",
            velocity=VelocityField(
                lambda x, y, t: (-y, x),
                2,
                (np.pi, np.pi),
                time_independent=True,
                periodic=False,
                name="rotation",
            ),
            exact=_rotation_exact,
        ),
        ProblemSpec(
            "swirl",
            2,
            square,
            cosine_bell,
            SWIRL_PERIOD,
            INITIAL,
            "swirling deformation flow, returns to the initial bell at T",
            velocity=VelocityField(_swirl, 2, (np.pi, np.pi), name="swirl"),
        ),
        ProblemSpec(
            "vp-strong-landau",
            2,
            ((0.0, 4.0 * np.pi), (-TWO_PI, TWO_PI)),
            _landau,
            0.5,
            REVERSAL,
            "Vlasov-Poisson strong Landau damping",
            model="vp",
            invariants=("mass", "l2", "energy", "entropy"),
            cfl=(0.1, 0.1, 0.1),
            default_mesh=32,
            long_time=40.0,
            long_time_cfl=10.0,
        ),
        ProblemSpec(
            "gc-stationary",
            2,
            periodic_square,
            _gc_stationary,
            1.0,
            EXACT,
            "guiding-center model, stationary rho = -2 sin(x) sin(y)",
            model="gc",
            exact=_gc_stationary_exact,
            invariants=("mass", "l2", "energy", "enstrophy"),
            cfl=(1.0, 1.0, 1.0),
        ),
        ProblemSpec(
            "gc-kh",
            2,
            ((0.0, 4.0 * np.pi), (0.0, TWO_PI)),
            _kelvin_helmholtz,
            5.0,
            SELF,
            "guiding-center Kelvin-Helmholtz instability",
            model="gc",
            invariants=("mass", "l2", "energy", "enstrophy"),
            cfl=(1.0, 1.0, 1.0),
            default_mesh=64,
            long_time=40.0,
            long_time_cfl=5.0,
        ),
        ProblemSpec(
            "euler-shear",
            2,
            periodic_square,
            _double_shear,
            8.0,
            SELF,
            "incompressible Euler double shear layer",
            model="euler",
            invariants=("mass", "l2", "energy", "enstrophy"),
            cfl=(5.0, 5.0, 5.0),
            default_mesh=64,
            long_time=8.0,
            long_time_cfl=5.0,
        ),
    ]
    return {p.name: p for p in problems}


CATALOG: Dict[str, ProblemSpec] = _build_catalog()


def catalog_lookup(name: str) -> ProblemSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigError(
            "Unknown problem %r, expected one of %s" % (name, ", ".join(CATALOG))
        )


def catalog_rows() -> List[Dict[str, object]]:
    """One summary row per problem for listings"""
    return [
        {
            "name": p.name,
            "dim": p.dim,
            "domain": " x ".join("[%.6g, %.6g]" % b for b in p.bounds),
            "T": p.final_time,
            "nonlinear": p.nonlinear,
            "description": p.description,
        }
        for p in CATALOG.values()
    ]
