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
Exception hierarchy
"""

from typing import Optional, Sequence


class EldgError(Exception):
    """Root of all package errors"""


class ConfigError(EldgError, ValueError):
    """Invalid run configuration or unknown problem"""


class MeshError(EldgError, ValueError):
    pass


class QuadratureError(EldgError, ValueError):
    pass


class TimeWindowError(EldgError, ValueError):
    """Query time outside [t^n, t^{n+1}]"""


class GeometryError(EldgError, ValueError):
    pass


class MapInvalidError(GeometryError):
    """Space-time map with non-positive Jacobian determinant"""

    def __init__(self, point: Sequence[float], tau: float, det: float):
        self.point = tuple(float(p) for p in point)
        self.tau = tau
        self.det = det
        super().__init__(
            "map invalid at point %s, tau=%.17g (det J = %.3e)"
            % (self.point, tau, det)
        )


class MapDegenerateError(GeometryError):
    pass


class NumericalFailure(EldgError, RuntimeError):
    """Fatal numerical problem, reported with exit code 3"""


class DistortionError(NumericalFailure):
    pass


class MassMatrixError(NumericalFailure):
    pass


class NonFiniteError(NumericalFailure):
    pass


class NeutralityError(NumericalFailure):
    pass


class StepRejected(EldgError):
    """Raised by a single step when the requested time step distorts cells"""

    def __init__(self, dt: float, suggested_dt: Optional[float]):
        self.dt = dt
        self.suggested_dt = suggested_dt
        super().__init__(
            "time step %.6g rejected, suggested %s" % (dt, suggested_dt)
        )
