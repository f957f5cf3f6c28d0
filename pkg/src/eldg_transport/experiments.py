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
Batch experiment drivers: single runs, convergence studies, CFL sweeps and
invariant histories, with their CSV and snapshot outputs
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np

from .config import RunConfig
from .consts import (
    CFL_SWEEP_COLUMNS,
    CONVERGENCE_COLUMNS,
    HISTORY_COLUMNS,
    MAX_HALVINGS,
    STABILITY_GROWTH,
    UNSTABLE_ERROR,
)
from .errors import ConfigError, GeometryError, NumericalFailure
from .fields import Invariants, invariants, reverse_velocity
from .logger import logger
from .mesh import DGField, Mesh1D, Mesh2D, field_error, sample_uniform_grid
from .problems import EXACT, INITIAL, REVERSAL, SELF, ProblemSpec
from .rkei import get_model, run_nonlinear
from .solver import StepConfig, march
from .utils import format_float, observed_orders, render_csv, write_atomic

Item = TypeVar("Item")
Out = TypeVar("Out")

NORMS = (("l1", 1), ("l2", 2), ("linf", "inf"))
REFERENCE_CFL = 0.1


@dataclass
class RunResult:
    config: RunConfig
    initial: DGField
    final: DGField
    steps: int = 0
    times: List[float] = field(default_factory=list)
    records: List[Invariants] = field(default_factory=list)
    snapshots: Dict[float, DGField] = field(default_factory=dict)


def _step_config(
    config: RunConfig, spec: ProblemSpec, max_halvings: int = MAX_HALVINGS
) -> StepConfig:
    return StepConfig(
        mode=config.mode,
        max_halvings=max_halvings,
        vertex_sampler=spec.vertex_sampler,
    )


def run_problem(
    config: RunConfig,
    initial: Optional[DGField] = None,
    track_invariants: bool = False,
    max_halvings: int = MAX_HALVINGS,
) -> RunResult:
    """Evolve a catalog problem from t=0 (or from `initial`) to its final time"""
    spec = config.spec
    mesh = spec.mesh(config.mesh)
    u0 = initial if initial is not None else spec.project_initial(mesh, config.k)
    final_time = u0.time + config.final_time
    stops = [u0.time + t for t in config.snapshots]
    step_config = _step_config(config, spec, max_halvings)
    logger.info(
        "running %s k=%d mesh=%d cfl=%g mode=%s to t=%g",
        spec.name,
        config.k,
        config.mesh,
        config.cfl,
        config.mode,
        final_time,
    )
    if spec.nonlinear:
        assert spec.model is not None
        trajectory = run_nonlinear(
            u0,
            get_model(spec.model),
            final_time,
            config.cfl,
            config.integrator,
            step_config,
            stops,
            track_invariants,
        )
        return RunResult(
            config,
            u0,
            trajectory.final,
            trajectory.steps,
            trajectory.times,
            trajectory.records,
            trajectory.snapshots,
        )

    result = RunResult(config, u0, u0)
    if track_invariants:
        result.times.append(u0.time)
        result.records.append(invariants(u0))

    def on_step(t: float, u: DGField) -> None:
        result.steps += 1
        if track_invariants:
            result.times.append(t)
            result.records.append(invariants(u))
        if any(abs(t - s) <= 1e-12 * max(1.0, abs(s)) for s in stops):
            result.snapshots[t] = u

    assert spec.velocity is not None
    result.final = march(
        u0, spec.velocity, final_time, config.cfl, step_config, stops, on_step
    )
    return result


def _norms(field_: DGField, reference) -> Dict[str, float]:
    return {
        name: field_error(field_, reference, p, normalized=True) for name, p in NORMS
    }


def reference_solution(config: RunConfig) -> DGField:
    """Same-scheme solution at the reference CFL"""
    return run_problem(config.replace(cfl=REFERENCE_CFL, snapshots=())).final


def result_errors(
    result: RunResult, reference: Optional[DGField] = None
) -> Dict[str, float]:
    """Errors of a finished run whose reference needs no further marching"""
    spec = result.config.spec
    if spec.reference in (EXACT, INITIAL):
        return _norms(result.final, spec.exact_at(result.config.final_time))
    if spec.reference == SELF and reference is not None:
        return _norms(result.final, reference)
    raise ConfigError(
        "Problem %r needs extra runs for its errors, use run_errors" % spec.name
    )


def run_errors(
    config: RunConfig,
    reference: Optional[DGField] = None,
    max_halvings: int = MAX_HALVINGS,
) -> Dict[str, float]:
    """L1, L2 and L-infinity errors (mean-value norms) of one run.

    The reference follows the problem: exact solution, return to the initial
    state, velocity-reversal round trip or a same-scheme CFL 0.1 run.
    """
    spec = config.spec
    run = config.replace(snapshots=())
    if spec.reference == REVERSAL:
        forward = run_problem(run, max_halvings=max_halvings)
        back = reverse_velocity(forward.final).replace(time=0.0)
        returned = run_problem(run, initial=back, max_halvings=max_halvings)
        return _norms(reverse_velocity(returned.final), forward.initial)
    if spec.reference == SELF and reference is None:
        reference = reference_solution(run)
    if spec.reference not in (EXACT, INITIAL, SELF):
        raise ValueError("Unknown reference kind %r" % spec.reference)
    return result_errors(run_problem(run, max_halvings=max_halvings), reference)


def _map(func: Callable[[Item], Out], items: Sequence[Item], jobs: int) -> List[Out]:
    """Apply func to items in order, in worker processes when jobs > 1"""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as executor:
            return list(executor.map(func, items))
    return [func(item) for item in items]


def _convergence_row(config: RunConfig) -> Dict[str, float]:
    errors = run_errors(config)
    logger.info("mesh %d: %s", config.mesh, errors)
    return errors


def convergence_study(
    base: RunConfig, meshes: Sequence[int], jobs: int = 1
) -> List[Tuple[Any, ...]]:
    """Rows mesh,l1,l1_order,l2,l2_order,linf,linf_order"""
    meshes = list(meshes)
    results = _map(_convergence_row, [base.replace(mesh=n) for n in meshes], jobs)
    columns = {name: [r[name] for r in results] for name, _ in NORMS}
    orders = {name: observed_orders(values, meshes) for name, values in columns.items()}
    rows = []
    for i, n in enumerate(meshes):
        row: List[Any] = [n]
        for name, _ in NORMS:
            row += [columns[name][i], orders[name][i]]
        rows.append(tuple(row))
    return rows


def _sweep_row(item: Tuple[RunConfig, Optional[DGField]]) -> Tuple[Any, ...]:
    config, reference = item
    nonlinear = config.spec.nonlinear
    norm = "l1" if nonlinear else "linf"
    # linear runs may not shrink the step to escape distortion
    halvings = MAX_HALVINGS if nonlinear else 0
    try:
        error = run_errors(config, reference, halvings)[norm]
    except (NumericalFailure, GeometryError) as exc:
        logger.warning("cfl %g failed: %s", config.cfl, exc)
        return (config.cfl, None, "unstable")
    if not np.isfinite(error) or error > UNSTABLE_ERROR:
        return (config.cfl, error if np.isfinite(error) else None, "unstable")
    return (config.cfl, error, "stable")


def mark_error_growth(
    rows: Sequence[Tuple[Any, ...]], growth: float = STABILITY_GROWTH
) -> List[Tuple[Any, ...]]:
    """Flag stable rows whose error exceeds `growth` times the smallest-CFL error"""
    stable = [row for row in rows if row[2] == "stable"]
    if not stable:
        return list(rows)
    baseline = min(stable, key=lambda row: row[0])[1]
    if baseline <= 0.0:
        return list(rows)
    limit = growth * baseline
    return [
        (cfl, error, "unstable" if status == "stable" and error > limit else status)
        for cfl, error, status in rows
    ]


def cfl_sweep(
    base: RunConfig, cfls: Sequence[float], jobs: int = 1
) -> List[Tuple[Any, ...]]:
    """Rows cfl,error,status.

    Failed or diverged runs are unstable. A linear run is also unstable when
    a step would need halving or its L-infinity error grows past
    `STABILITY_GROWTH` times the error at the smallest CFL. Nonlinear errors
    grow with the temporal order, so only divergence counts there.
    """
    reference = None
    if base.spec.reference == SELF:
        reference = reference_solution(base)
    items = [(base.replace(cfl=c), reference) for c in cfls]
    rows = _map(_sweep_row, items, jobs)
    if base.spec.nonlinear:
        return rows
    return mark_error_growth(rows)


def max_stable_cfl(rows: Iterable[Sequence[Any]]) -> Optional[float]:
    """Largest tested CFL below the first unstable one"""
    best = None
    for cfl, _, status in sorted(rows, key=lambda row: row[0]):
        if status != "stable":
            break
        best = cfl
    return best


def _deviation(value: Optional[float], initial: Optional[float]) -> Optional[float]:
    if value is None or initial is None:
        return None
    if initial == 0.0:
        return value - initial
    return (value - initial) / abs(initial)


def history_rows(
    model: Optional[str], times: Sequence[float], records: Sequence[Invariants]
) -> List[Tuple[Any, ...]]:
    """Deviations of the tracked invariants from their initial values"""
    columns = HISTORY_COLUMNS[model]
    start = records[0].as_dict()
    rows = []
    for t, record in zip(times, records):
        values = record.as_dict()
        row: List[Any] = [t]
        for column in columns[1:]:
            key = column[: -len("_dev")]
            row.append(_deviation(values[key], start[key]))
        rows.append(tuple(row))
    return rows


def render_snapshot(field_: DGField, label: str = "") -> str:
    """Structured-grid text: header lines then row-major samples of u_h.

    Samples sit at (k+1) uniform points per cell and axis; 2D rows run along
    x with y increasing from row to row.
    """
    per_cell = field_.degree + 1
    mesh = field_.mesh
    lines = ["# %s t=%s" % (label, format_float(field_.time))]
    if field_.dim == 1:
        assert isinstance(mesh, Mesh1D)
        xs, values = sample_uniform_grid(field_, per_cell)
        lines += [
            "nx %d" % len(xs),
            "domain %s %s" % (format_float(mesh.x_lo), format_float(mesh.x_hi)),
            " ".join(format_float(v) for v in values),
        ]
    else:
        assert isinstance(mesh, Mesh2D)
        xs, ys, grid = sample_uniform_grid(field_, per_cell)
        lines += [
            "nx %d" % len(xs),
            "ny %d" % len(ys),
            "domain %s"
            % " ".join(
                format_float(v)
                for v in (mesh.x.x_lo, mesh.x.x_hi, mesh.y.x_lo, mesh.y.x_hi)
            ),
        ]
        lines += [" ".join(format_float(v) for v in row) for row in grid]
    return "\n".join(lines) + "\n"


def output_stem(config: RunConfig) -> str:
    return "%s_k%d_%s" % (config.problem, config.k, config.mode)


def write_table(
    path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]
) -> str:
    write_atomic(path, render_csv(columns, rows))
    logger.info("wrote %s", path)
    return path


def write_snapshots(config: RunConfig, snapshots: Dict[float, DGField]) -> List[str]:
    paths = []
    for t in sorted(snapshots):
        path = os.path.join(
            config.out, "%s_t%s.dat" % (output_stem(config), format_float(t))
        )
        write_atomic(path, render_snapshot(snapshots[t], config.problem))
        paths.append(path)
    return paths


def time_history(config: RunConfig) -> Tuple[str, List[str]]:
    """Run with invariant tracking; write the history CSV and snapshots"""
    result = run_problem(config, track_invariants=True)
    model = config.spec.model
    rows = history_rows(model, result.times, result.records)
    path = os.path.join(config.out, output_stem(config) + "_history.csv")
    write_table(path, HISTORY_COLUMNS[model], rows)
    return path, write_snapshots(config, result.snapshots)


def write_convergence(config: RunConfig, rows: Sequence[Sequence[Any]]) -> str:
    path = os.path.join(config.out, output_stem(config) + "_convergence.csv")
    return write_table(path, CONVERGENCE_COLUMNS, rows)


def write_cfl_sweep(config: RunConfig, rows: Sequence[Sequence[Any]]) -> str:
    path = os.path.join(config.out, output_stem(config) + "_cfl_sweep.csv")
    return write_table(path, CFL_SWEEP_COLUMNS, rows)
