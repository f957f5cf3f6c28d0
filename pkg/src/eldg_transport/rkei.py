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
Commutator-free Runge-Kutta exponential integrators for the nonlinear models.

Every stage is a linear ELDG solve with a frozen velocity field built from
earlier stage solutions.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .adjoint import VelocityField
from .errors import ConfigError
from .fields import (
    EULER,
    GUIDING_CENTER,
    LAPLACIAN,
    MINUS_LAPLACIAN,
    ElectricField1D,
    Invariants,
    charge_density,
    invariants,
    solve_poisson_1d,
    solve_poisson_2d_periodic,
)
from .logger import logger
from .mesh import DGField, Mesh2D
from .solver import StepConfig, advance_until, cfl_time_step, eldg_step

Array = np.ndarray

# the phase-space cutoff in v leaves a small net charge
FIELD_TOLERANCE = 1e-6


class FrozenField(VelocityField):
    """Time-independent linear combination sum_i c_i P_i of velocity fields"""

    def __init__(self, weights: Sequence[float], components: Sequence[VelocityField]):
        if len(weights) != len(components) or not components:
            raise ValueError("FrozenField needs one weight per component")
        self.weights = tuple(float(w) for w in weights)
        self.components = tuple(components)
        dim = components[0].dim
        speeds = np.zeros(dim)
        for weight, component in zip(self.weights, self.components):
            speeds += abs(weight) * np.asarray(component.max_speed)
        super().__init__(
            self._evaluate_1d if dim == 1 else self._evaluate_2d,
            dim,
            tuple(speeds),
            divergence_free=all(c.divergence_free for c in components),
            time_independent=all(c.time_independent for c in components),
            periodic=all(c.periodic for c in components),
            name="+".join(
                "%g*%s" % (w, c.name) for w, c in zip(self.weights, components)
            ),
        )

    def _evaluate_1d(self, x, t):
        return sum(w * c(x, t=t) for w, c in zip(self.weights, self.components))

    def _evaluate_2d(self, x, y, t):
        a = b = 0.0
        for weight, component in zip(self.weights, self.components):
            ca, cb = component(x, y, t=t)
            a = a + weight * ca
            b = b + weight * cb
        return a, b


class PhaseSpaceVelocity(VelocityField):
    """(v, E(x)) for Vlasov-Poisson, keeping the solved E"""

    def __init__(self, electric: ElectricField1D, v_max: float):
        self.electric = electric
        super().__init__(
            lambda x, v, t: (v, electric(x)),
            2,
            (v_max, electric.max_abs()),
            divergence_free=True,
            time_independent=True,
            periodic=False,
            name="vp",
        )


class NonlinearModel:
    """A transport model whose velocity P(u) depends on the solution"""

    name = ""

    def velocity(self, u: DGField) -> VelocityField:
        raise NotImplementedError

    def invariants(
        self, u: DGField, velocity: Optional[VelocityField] = None
    ) -> Invariants:
        return invariants(u)


class LinearModel(NonlinearModel):
    """P(u) = a fixed velocity field"""

    name = "linear"

    def __init__(self, velocity: VelocityField):
        self._velocity = velocity

    def velocity(self, u: DGField) -> VelocityField:
        return self._velocity


class VlasovPoisson(NonlinearModel):
    name = "vp"

    def velocity(self, u: DGField) -> VelocityField:
        mesh = u.mesh
        assert isinstance(mesh, Mesh2D)
        rho = charge_density(u)
        electric = solve_poisson_1d(rho, tolerance=FIELD_TOLERANCE, remove_mean=True)
        v_max = max(abs(mesh.y.x_lo), abs(mesh.y.x_hi))
        return PhaseSpaceVelocity(electric, v_max)

    def invariants(
        self, u: DGField, velocity: Optional[VelocityField] = None
    ) -> Invariants:
        if velocity is None:
            velocity = self.velocity(u)
        assert isinstance(velocity, PhaseSpaceVelocity)
        return invariants(u, "vp", velocity.electric)


class GuidingCenter(NonlinearModel):
    name = "gc"
    equation = MINUS_LAPLACIAN
    orientation = GUIDING_CENTER

    def velocity(self, u: DGField) -> VelocityField:
        return solve_poisson_2d_periodic(
            u, self.equation, self.orientation, FIELD_TOLERANCE
        )

    def invariants(
        self, u: DGField, velocity: Optional[VelocityField] = None
    ) -> Invariants:
        return invariants(u, self.name, velocity or self.velocity(u))


class Euler(GuidingCenter):
    name = "euler"
    equation = LAPLACIAN
    orientation = EULER


MODEL_TYPES = {"vp": VlasovPoisson, "gc": GuidingCenter, "euler": Euler}


def get_model(name: str) -> NonlinearModel:
    try:
        return MODEL_TYPES[name]()
    except KeyError:
        raise ConfigError("Unknown nonlinear model %r" % (name,))


def cf2_step(
    u: DGField,
    model: NonlinearModel,
    dt: float,
    config: StepConfig = StepConfig(),
    velocity: Optional[VelocityField] = None,
) -> DGField:
    """Two-stage commutator-free step; `velocity` may pass a precomputed P(u)"""
    t_n = u.time
    p1 = velocity or model.velocity(u)
    u2 = eldg_step(u, FrozenField((0.5,), (p1,)), t_n, dt, config)
    p2 = model.velocity(u2)
    return eldg_step(u, FrozenField((1.0,), (p2,)), t_n, dt, config)


def cf3_step(
    u: DGField,
    model: NonlinearModel,
    dt: float,
    config: StepConfig = StepConfig(),
    velocity: Optional[VelocityField] = None,
) -> DGField:
    """Three-stage commutator-free step; the last solve starts from u^(2)"""
    t_n = u.time
    p1 = velocity or model.velocity(u)
    u2 = eldg_step(u, FrozenField((1.0 / 3.0,), (p1,)), t_n, dt, config)
    p2 = model.velocity(u2)
    u3 = eldg_step(u, FrozenField((2.0 / 3.0,), (p2,)), t_n, dt, config)
    p3 = model.velocity(u3)
    last = FrozenField((-1.0 / 12.0, 0.75), (p1, p3))
    return eldg_step(u2.replace(time=t_n), last, t_n, dt, config)


SCHEMES: Dict[str, Callable[..., DGField]] = {"cf2": cf2_step, "cf3": cf3_step}


@dataclass
class Trajectory:
    """Outcome of a nonlinear run"""

    initial: DGField
    final: DGField
    times: List[float] = field(default_factory=list)
    records: List[Invariants] = field(default_factory=list)
    snapshots: Dict[float, DGField] = field(default_factory=dict)
    steps: int = 0


class _VelocityCache:
    """Remembers P(u) of the latest state, reused by the next step"""

    def __init__(self, model: NonlinearModel):
        self.model = model
        self.state: Optional[DGField] = None
        self.velocity: Optional[VelocityField] = None

    def __call__(self, u: DGField) -> VelocityField:
        if u is not self.state or self.velocity is None:
            self.state = u
            self.velocity = self.model.velocity(u)
        return self.velocity


TrajectoryCallback = Callable[[float, DGField, Optional[Invariants]], None]


def run_nonlinear(
    u0: DGField,
    model: NonlinearModel,
    final_time: float,
    cfl: float,
    scheme: str = "cf3",
    config: StepConfig = StepConfig(),
    snapshot_times: Sequence[float] = (),
    track_invariants: bool = False,
    callback: Optional[TrajectoryCallback] = None,
) -> Trajectory:
    """March a nonlinear model to final_time with a commutator-free scheme.

    The step size follows the CFL rule with the current maximum speeds.
    """
    if scheme not in SCHEMES:
        raise ConfigError("Unknown exponential integrator %r" % (scheme,))
    if cfl <= 0:
        raise ConfigError("CFL must be positive")
    stepper = SCHEMES[scheme]
    cache = _VelocityCache(model)
    trajectory = Trajectory(u0, u0)
    if track_invariants:
        trajectory.times.append(u0.time)
        trajectory.records.append(model.invariants(u0, cache(u0)))
    stops = tuple(snapshot_times)

    def propose(u: DGField, t: float) -> float:
        return cfl_time_step(u.mesh, cfl, cache(u).max_speeds())

    def step(u: DGField, t: float, dt: float) -> DGField:
        return stepper(u, model, dt, config, cache(u))

    def on_step(t: float, u: DGField) -> None:
        trajectory.steps += 1
        record = None
        if track_invariants:
            record = model.invariants(u, cache(u))
            trajectory.times.append(t)
            trajectory.records.append(record)
        if any(abs(t - s) <= 1e-12 * max(1.0, abs(s)) for s in stops):
            trajectory.snapshots[t] = u
        if callback is not None:
            callback(t, u, record)

    trajectory.final = advance_until(
        u0, final_time, step, propose, stops, on_step, config.max_halvings
    )
    logger.info(
        "%s %s run finished at t=%.6g after %d steps",
        model.name,
        scheme,
        trajectory.final.time,
        trajectory.steps,
    )
    return trajectory
