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
Command line entry point: parses options and dispatches to the drivers.
"""

import argparse
import sys
from typing import Any, Dict, List, Optional

from ._version import __version__
from .config import RunConfig, load_config, resolve_config
from .consts import EXIT_BAD_CONFIG, EXIT_NUMERICAL_FAILURE, EXIT_OK, INTEGRATORS, MODES
from .errors import ConfigError, GeometryError, MeshError, NumericalFailure
from .experiments import (
    cfl_sweep,
    convergence_study,
    max_stable_cfl,
    result_errors,
    run_problem,
    time_history,
    write_cfl_sweep,
    write_convergence,
    write_snapshots,
)
from .logger import logger, set_verbosity
from .problems import EXACT, INITIAL, catalog_rows
from .utils import format_float, parse_float_list, parse_int_list, render_csv


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--problem", help="catalog problem name")
    parser.add_argument("--k", type=int, help="polynomial degree (1-3)")
    parser.add_argument("--mesh", help="cells per axis, comma separated for studies")
    parser.add_argument("--cfl", help="CFL number, comma separated for sweeps")
    parser.add_argument("--T", type=float, help="final time")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--integrator", choices=INTEGRATORS)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--snapshots", help="snapshot times t1,t2,...")
    parser.add_argument("--config", metavar="FILE", help="key = value config file")
    parser.add_argument(
        "--full",
        action="store_true",
        default=None,
        help="use the long-time settings of the problem",
    )
    parser.add_argument("--jobs", type=int, help="worker processes for studies")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eldg", description="Eulerian-Lagrangian DG transport experiments"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "evolve one problem and write snapshots"),
        ("converge", "mesh refinement study"),
        ("cfl-sweep", "error and stability versus CFL"),
        ("history", "invariant deviations over time"),
    ):
        _add_run_options(commands.add_parser(name, help=text))
    commands.add_parser("catalog", help="list the available problems")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    try:
        return {
            "problem": args.problem,
            "k": args.k,
            "mesh": None if args.mesh is None else parse_int_list(args.mesh),
            "cfl": None if args.cfl is None else parse_float_list(args.cfl),
            "T": args.T,
            "mode": args.mode,
            "integrator": args.integrator,
            "out": args.out,
            "snapshots": None
            if args.snapshots is None
            else parse_float_list(args.snapshots),
            "full": args.full,
            "jobs": args.jobs,
        }
    except ValueError as exc:
        raise ConfigError(str(exc))


def cmd_run(base: RunConfig) -> None:
    result = run_problem(base)
    drift = result.final.total_mass - result.initial.total_mass
    print(
        "%s: %d steps to t=%s, mass drift %s"
        % (
            base.problem,
            result.steps,
            format_float(result.final.time),
            format_float(drift),
        )
    )
    for path in write_snapshots(base, result.snapshots):
        print(path)
    if base.spec.reference in (EXACT, INITIAL):
        errors = result_errors(result)
        print(" ".join("%s=%s" % (k, format_float(v)) for k, v in errors.items()))


def cmd_converge(base: RunConfig, meshes: List[int], jobs: int) -> None:
    rows = convergence_study(base, meshes, jobs)
    print(write_convergence(base, rows))


def cmd_cfl_sweep(base: RunConfig, cfls: List[float], jobs: int) -> None:
    rows = cfl_sweep(base, cfls, jobs)
    print(write_cfl_sweep(base, rows))
    limit = max_stable_cfl(rows)
    print("max stable cfl: %s" % ("none" if limit is None else format_float(limit)))


def cmd_history(base: RunConfig) -> None:
    path, snapshots = time_history(base)
    for written in [path] + snapshots:
        print(written)


def cmd_catalog() -> None:
    rows = catalog_rows()
    columns = ["name", "dim", "domain", "T", "nonlinear", "description"]
    sys.stdout.write(render_csv(columns, ([row[c] for c in columns] for row in rows)))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_verbosity(args.verbose)
    try:
        if args.command == "catalog":
            cmd_catalog()
            return EXIT_OK
        conf = load_config(args.config, _overrides(args))
        base, meshes, cfls = resolve_config(conf)
        jobs = int(conf["jobs"])
        if jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if args.command == "run":
            cmd_run(base)
        elif args.command == "converge":
            cmd_converge(base, meshes, jobs)
        elif args.command == "cfl-sweep":
            cmd_cfl_sweep(base, cfls, jobs)
        else:
            cmd_history(base)
    except (ConfigError, MeshError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_BAD_CONFIG
    except (NumericalFailure, GeometryError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL_FAILURE
    return EXIT_OK
