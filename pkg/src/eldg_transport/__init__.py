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
Eulerian-Lagrangian discontinuous Galerkin transport solvers
"""

from ._version import __version__  # noqa: F401
from .adjoint import AdjointField, VelocityField, validate_timestep  # noqa: F401
from .fields import (  # noqa: F401
    charge_density,
    invariants,
    solve_poisson_1d,
    solve_poisson_2d_periodic,
)
from .mesh import DGField, build_mesh, field_error, project_function  # noqa: F401
from .problems import catalog_lookup  # noqa: F401
from .rkei import cf2_step, cf3_step, run_nonlinear  # noqa: F401
from .solver import StepConfig, eldg_step, march  # noqa: F401
