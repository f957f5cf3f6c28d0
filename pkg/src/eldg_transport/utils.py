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
Common reusable utilities
"""

import csv
import io
import os
import tempfile
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from .consts import FLOAT_DIGITS


def format_float(value: float) -> str:
    """Render a float with full round-trip precision"""
    return "%.*g" % (FLOAT_DIGITS, value)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def write_atomic(path: str, text: str) -> None:
    """Write text to path via a temporary file in the same directory"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()


def parse_float_list(text: str) -> List[float]:
    """Parse comma separated floats, e.g. '0.5,1,2'"""
    items = [item.strip() for item in text.split(",") if item.strip()]
    try:
        return [float(item) for item in items]
    except ValueError:
        raise ValueError("Invalid list of numbers: %r" % text)


def parse_int_list(text: str) -> List[int]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    try:
        return [int(item) for item in items]
    except ValueError:
        raise ValueError("Invalid list of integers: %r" % text)


def wrap_periodic(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map coordinates into [lo, hi)"""
    length = hi - lo
    wrapped = lo + np.mod(np.asarray(x, dtype=float) - lo, length)
    # np.mod can return exactly `length` for tiny negative inputs
    return np.where(wrapped >= hi, wrapped - length, wrapped)


def observed_orders(
    errors: Sequence[float], meshes: Optional[Sequence[int]] = None
) -> List[Any]:
    """Observed orders between successive errors, None for the first entry.

    Without `meshes` each refinement is taken to halve h (log2 ratios).
    """
    orders: List[Any] = [None]
    for i, (coarse, fine) in enumerate(zip(errors[:-1], errors[1:])):
        ratio = 2.0 if meshes is None else meshes[i + 1] / meshes[i]
        if coarse > 0 and fine > 0 and np.isfinite(coarse) and np.isfinite(fine):
            orders.append(float(np.log(coarse / fine) / np.log(ratio)))
        else:
            orders.append(None)
    return orders
