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
Sets up run configuration: defaults, config files and validated run settings
"""

from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

from .consts import INTEGRATORS, MODES, SUPPORTED_DEGREES
from .errors import ConfigError
from .logger import logger
from .problems import ProblemSpec, catalog_lookup
from .utils import parse_float_list, parse_int_list

# default configuration; empty mesh/cfl lists and unset T/integrator fall back
# to the problem's own defaults
default_conf: Dict[str, Any] = {
    "version": 1.1,
    "problem": "advect1d-const",
    "k": 2,
    "mesh": [],
    "cfl": [],
    "T": None,
    "mode": "eldg-st1",
    "integrator": None,
    "out": "results",
    "snapshots": [],
    "jobs": 1,
    "full": False,
}


def _optional_float(value: str) -> Optional[float]:
    if value.strip().lower() in ("", "none", "default"):
        return None
    return float(value)


def _optional_str(value: str) -> Optional[str]:
    value = value.strip()
    return None if value.lower() in ("", "none", "default", "auto") else value


def _flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("Not a boolean: %r" % value)


_PARSERS = {
    "version": float,
    "problem": str.strip,
    "k": int,
    "mesh": parse_int_list,
    "cfl": parse_float_list,
    "T": _optional_float,
    "mode": str.strip,
    "integrator": _optional_str,
    "out": str.strip,
    "snapshots": parse_float_list,
    "jobs": int,
    "full": _flag,
}


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse flat `key = value` lines; `#` starts a comment"""
    conf: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("Line %d: expected key = value, got %r" % (number, raw))
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError("Line %d: unknown config key %r" % (number, key))
        try:
            conf[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError("Line %d: bad value for %s: %s" % (number, key, exc))
    return conf


def upgrade_config(conf: Dict[str, Any]) -> Dict[str, Any]:
    """Fill keys added since the config's version and bump the version"""
    version = conf.get("version", 0)
    if version < default_conf["version"]:
        logger.info("Updating config from earlier release (version %s)", version)
        for key in list(default_conf.keys()):
            if key not in conf:
                conf[key] = default_conf[key]
        conf["version"] = default_conf["version"]
    elif version > default_conf["version"]:
        raise ConfigError("Config version %s is newer than supported" % version)
    return conf


def load_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """Defaults, then file values, then explicit overrides (None is ignored)"""
    conf = dict(default_conf)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError("Cannot read config file %s: %s" % (path, exc))
        from_file = parse_config_text(text)
        from_file.setdefault("version", 1.0)
        conf.update(upgrade_config(from_file))
    for key, value in (overrides or {}).items():
        if key not in default_conf:
            raise ConfigError("Unknown config key %r" % (key,))
        if value is not None:
            conf[key] = value
    return conf


@dataclass(frozen=True)
class RunConfig:
    """Settings of a single run, validated on construction"""

    problem: str
    k: int = 2
    mesh: int = 40
    cfl: float = 0.18
    T: Optional[float] = None
    mode: str = "eldg-st1"
    integrator: str = "none"
    out: str = "results"
    snapshots: Tuple[float, ...] = ()

    def __post_init__(self):
        spec = catalog_lookup(self.problem)
        if self.k not in SUPPORTED_DEGREES:
            raise ConfigError(
                "Polynomial degree k=%r not in %s" % (self.k, SUPPORTED_DEGREES)
            )
        if self.mesh < 2:
            raise ConfigError("Mesh must have at least 2 cells per axis")
        if not self.cfl > 0:
            raise ConfigError("CFL must be positive, got %r" % (self.cfl,))
        if self.T is not None and not self.T > 0:
            raise ConfigError("Final time must be positive, got %r" % (self.T,))
        if self.mode not in MODES:
            raise ConfigError("Unknown mode %r" % (self.mode,))
        if self.integrator not in INTEGRATORS:
            raise ConfigError("Unknown integrator %r" % (self.integrator,))
        if spec.nonlinear and self.integrator == "none":
            raise ConfigError("Nonlinear problem %s needs cf2 or cf3" % spec.name)
        if not spec.nonlinear and self.integrator != "none":
            raise ConfigError("Linear problem %s takes integrator none" % spec.name)
        final = self.final_time
        if any(not 0 < t < final for t in self.snapshots):
            raise ConfigError("Snapshot times must lie inside (0, %g)" % final)

    @property
    def spec(self) -> ProblemSpec:
        return catalog_lookup(self.problem)

    @property
    def final_time(self) -> float:
        return self.spec.final_time if self.T is None else self.T

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def default_integrator(spec: ProblemSpec, k: int) -> str:
    if not spec.nonlinear:
        return "none"
    return "cf2" if k == 1 else "cf3"


def resolve_config(conf: Mapping[str, Any]) -> Tuple[RunConfig, List[int], List[float]]:
    """Base run plus the mesh and CFL lists of a study"""
    spec = catalog_lookup(conf["problem"])
    k = int(conf["k"])
    meshes = list(conf["mesh"]) or [spec.default_mesh]
    full = bool(conf.get("full"))
    default_cfl = spec.cfl_for(k)
    if full and spec.long_time_cfl is not None:
        default_cfl = spec.long_time_cfl
    cfls = list(conf["cfl"]) or [default_cfl]
    T = conf["T"]
    if T is None and full and spec.long_time is not None:
        T = spec.long_time
    base = RunConfig(
        problem=spec.name,
        k=k,
        mesh=meshes[0],
        cfl=cfls[0],
        T=T,
        mode=conf["mode"],
        integrator=conf["integrator"] or default_integrator(spec, k),
        out=conf["out"],
        snapshots=tuple(conf["snapshots"]),
    )
    return base, meshes, cfls
