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
Global variables
"""

import os

PACKAGE_PATH = os.path.dirname(__file__)
MODULE_PACKAGE = __name__.split(".")[0]

SUPPORTED_DEGREES = (1, 2, 3)
MAX_GAUSS_POINTS = 16

# tolerances
JACOBIAN_FLOOR = 1e-10
SNAP_TOLERANCE = 1e-12  # relative to min(dx, dy)
PIECE_AREA_FLOOR = 1e-14  # relative to cell area
CONDITION_BOUND = 1e12
NEUTRALITY_TOLERANCE = 1e-10
ENTROPY_FLOOR = 1e-14
MAX_HALVINGS = 20
UNSTABLE_ERROR = 1e3
# a linear sweep row is unstable past this multiple of the smallest-CFL error
STABILITY_GROWTH = 10.0
MIN_COLLOCATION_POINTS = 8

# polygon integrands are products of a degree k field and a degree k per
# axis test polynomial
MAX_POLYGON_DEGREE = 3 * max(SUPPORTED_DEGREES)

# eldg-st1/st2: moving-frame RK on upstream-projected moments (vertex-sampled or
# traced adjoint); sldg: semi-Lagrangian DG, the L2 projection onto
# straight-edged upstream cells alone; rkdg: zero adjoint, classical RKDG
MODES = ("eldg-st1", "eldg-st2", "sldg", "rkdg")
SLDG_MODE = "sldg"
INTEGRATORS = ("none", "cf2", "cf3")
MODELS = ("vp", "gc", "euler")

CONVERGENCE_COLUMNS = (
    "mesh",
    "l1",
    "l1_order",
    "l2",
    "l2_order",
    "linf",
    "linf_order",
)
CFL_SWEEP_COLUMNS = ("cfl", "error", "status")
_KINETIC_HISTORY = ("time", "mass_dev", "l2_dev", "energy_dev", "entropy_dev")
HISTORY_COLUMNS = {
    None: ("time", "mass_dev", "l2_dev"),
    "vp": _KINETIC_HISTORY,
    "gc": _KINETIC_HISTORY + ("enstrophy_dev",),
    "euler": _KINETIC_HISTORY + ("enstrophy_dev",),
}

FLOAT_DIGITS = 17

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_NUMERICAL_FAILURE = 3
