"""JSON configuration, run manifests and field snapshot files.

Config files are JSON objects with a ``kind`` of ``simulate``, ``study`` or
``mobility``.  Unknown keys and wrongly typed values are rejected with the
dotted path of the offending field.  Every omitted field takes its default,
and :func:`serialize_config` writes all fields back so that
``parse_config(serialize_config(c)) == c``.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .potential import ViscosityModel, named_well
from .reference import KINDS, ReferenceScenario
from .solver import InitialCondition, SimConfig

__all__ = [
    "ConfigError",
    "PhysicalValidityError",
    "StudyConfig",
    "MobilityConfig",
    "RunManifest",
    "parse_config",
    "config_from_dict",
    "config_to_dict",
    "serialize_config",
    "config_hash",
    "DEFAULT_TOLERANCES",
    "tolerances",
    "worker_count",
    "read_snapshot",
]


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class PhysicalValidityError(ValueError):
    pass


DEFAULT_TOLERANCES = {
    "profile.newton": 1e-10,
    "matched_ode.solvability": 1e-6,
    "solver.energy_step": 1e-8,
    "solver.energy_run": 1e-3,
}


def tolerances(overrides: str | dict | None = None):
    tol = dict(DEFAULT_TOLERANCES)
    if overrides:
        extra = json.loads(overrides) if isinstance(overrides, str) else dict(overrides)
        unknown = set(extra) - set(tol)
        if unknown:
            raise ConfigError("tol-overrides", f"unknown tolerance keys {sorted(unknown)}")
        tol.update({k: float(v) for k, v in extra.items()})
    return tol


def worker_count(default=1):
    """Worker processes from ``NSACLAB_WORKERS``."""
    raw = os.environ.get("NSACLAB_WORKERS")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError("NSACLAB_WORKERS", f"not an integer: {raw!r}") from exc
    return max(1, n)


@dataclass(frozen=True)
class StudyConfig:
    alpha: float = 0.5
    eps_list: tuple = (1.0 / 16, 1.0 / 32, 1.0 / 64)
    T: float = 1.0 / 64
    n_snap: int = 4
    cells_per_eps: float = 2.0
    scenario: ReferenceScenario = field(
        default_factory=lambda: ReferenceScenario("stationary_bubble"))
    base: SimConfig = field(default_factory=SimConfig)


@dataclass(frozen=True)
class MobilityConfig:
    eps: float = 1.0 / 32
    alpha_list: tuple = (0.0, 0.5, 1.0)
    shrink: float = 0.3
    cells_per_eps: float = 2.0
    scenario: ReferenceScenario = field(
        default_factory=lambda: ReferenceScenario("stationary_bubble"))
    base: SimConfig = field(default_factory=SimConfig)


# ------------------------------------------------------------ validation

_NUM = (int, float)


def _check_type(path, value, kind):
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, _NUM):
            raise ConfigError(path, f"expected a number, got {type(value).__name__}")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
        return value
    if kind == "float?":
        return None if value is None else _check_type(path, value, "float")
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {type(value).__name__}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if kind.startswith("vec"):
        n = int(kind[3:]) if kind[3:] else None
        if not isinstance(value, (list, tuple)) or (n is not None and len(value) != n):
            raise ConfigError(path, f"expected a list of {n or 'some'} numbers")
        return tuple(_check_type(f"{path}[{i}]", v, "float") for i, v in enumerate(value))
    if kind == "radius":
        if isinstance(value, (list, tuple)):
            return _check_type(path, value, "vec2")
        return _check_type(path, value, "float")
    raise AssertionError(kind)


def _take(path, data, schema):
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(data) - set(schema)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0],
                          "unknown field")
    out = {}
    for key, kind in schema.items():
        if key in data:
            out[key] = _check_type(f"{path}.{key}" if path else key, data[key], kind)
    return out


_SIM_SCHEMA = {
    "nx": "int", "ny": "int", "Lx": "float", "Ly": "float", "x0": "float", "y0": "float",
    "boundary": "str", "eps": "float", "alpha": "float", "mobility": "float?",
    "T": "float", "dt_max": "float?", "cfl": "float", "visc_safety": "float",
    "ac_accuracy": "float", "output_every": "float?", "snapshot_every": "float?",
    "check_energy": "bool", "navier_stokes": "bool",
}
_INIT_SCHEMA = {"kind": "str", "center": "vec2", "radius": "radius", "U": "vec2", "delta": "float?"}
_VISC_SCHEMA = {"nu_plus": "float", "nu_minus": "float"}
_SCEN_SCHEMA = {"kind": "str", "center": "vec2", "R0": "float", "U": "vec2", "delta": "float?"}


def _sim_from_dict(d, path="config"):
    d = dict(d)
    init = d.pop("init", None)
    visc = d.pop("viscosity", None)
    pot = d.pop("potential", "quartic")
    kw = _take(path, d, _SIM_SCHEMA)
    if init is not None:
        ik = _take(f"{path}.init", init, _INIT_SCHEMA)
        if ik.get("kind", "circle") not in ("circle", "ellipse", "stripe", "uniform"):
            raise ConfigError(f"{path}.init.kind", f"unknown initial condition {ik['kind']!r}")
        kw["init"] = InitialCondition(**ik)
    if visc is not None:
        try:
            kw["viscosity"] = ViscosityModel(**_take(f"{path}.viscosity", visc, _VISC_SCHEMA))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}.viscosity", str(exc)) from exc
    try:
        kw["well"] = named_well(pot)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}.potential", str(exc)) from exc
    try:
        cfg = SimConfig(**kw)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc
    if cfg.h > cfg.eps * (1 + 1e-12):
        raise PhysicalValidityError(
            f"{path}: interface under-resolved, requires h <= eps but h = {cfg.h:.6g} "
            f"> eps = {cfg.eps:.6g}")
    return cfg


def _scenario_from_dict(d, path):
    kw = _take(path, d, _SCEN_SCHEMA)
    if "kind" in kw and kw["kind"] not in KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {KINDS}")
    kw.setdefault("kind", "stationary_bubble")
    return ReferenceScenario(**kw)


def config_from_dict(data: dict):
    if not isinstance(data, dict):
        raise ConfigError("config", "expected a JSON object")
    data = dict(data)
    kind = data.pop("kind", "simulate")
    if kind == "simulate":
        return _sim_from_dict(data)
    if kind in ("study", "mobility"):
        base = _sim_from_dict(data.pop("base", {}), "config.base")
        scen = _scenario_from_dict(data.pop("scenario", {}), "config.scenario")
        if kind == "study":
            kw = _take("config", data, {"alpha": "float", "eps_list": "vec", "T": "float",
                                        "n_snap": "int", "cells_per_eps": "float"})
            cfg = StudyConfig(scenario=scen, base=base, **kw)
            for e in cfg.eps_list:
                if base.Lx / round(base.Lx * cfg.cells_per_eps / e) > e:
                    raise PhysicalValidityError(f"config.eps_list: h > eps at eps={e}")
            return cfg
        kw = _take("config", data, {"eps": "float", "alpha_list": "vec", "shrink": "float",
                                    "cells_per_eps": "float"})
        return MobilityConfig(scenario=scen, base=base, **kw)
    raise ConfigError("config.kind", f"unknown config kind {kind!r}")


def parse_config(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return config_from_dict(data)


def _sim_to_dict(cfg: SimConfig):
    out = {f.name: getattr(cfg, f.name) for f in fields(SimConfig)
           if f.name not in ("viscosity", "well", "init")}
    out["viscosity"] = {"nu_plus": cfg.viscosity.nu_plus, "nu_minus": cfg.viscosity.nu_minus}
    out["potential"] = cfg.well.name
    ic = cfg.init
    out["init"] = {"kind": ic.kind, "center": list(ic.center),
                   "radius": list(ic.radius) if isinstance(ic.radius, tuple) else ic.radius,
                   "U": list(ic.U), "delta": ic.delta}
    return out


def _scenario_to_dict(sc: ReferenceScenario):
    return {"kind": sc.kind, "center": list(sc.center), "R0": sc.R0, "U": list(sc.U),
            "delta": sc.delta}


def config_to_dict(cfg):
    if isinstance(cfg, SimConfig):
        return {"kind": "simulate", **_sim_to_dict(cfg)}
    if isinstance(cfg, StudyConfig):
        return {"kind": "study", "alpha": cfg.alpha, "eps_list": list(cfg.eps_list), "T": cfg.T,
                "n_snap": cfg.n_snap, "cells_per_eps": cfg.cells_per_eps,
                "scenario": _scenario_to_dict(cfg.scenario), "base": _sim_to_dict(cfg.base)}
    if isinstance(cfg, MobilityConfig):
        return {"kind": "mobility", "eps": cfg.eps, "alpha_list": list(cfg.alpha_list),
                "shrink": cfg.shrink, "cells_per_eps": cfg.cells_per_eps,
                "scenario": _scenario_to_dict(cfg.scenario), "base": _sim_to_dict(cfg.base)}
    raise TypeError(f"cannot serialize {type(cfg).__name__}")


def serialize_config(cfg, path=None):
    text = json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text)
    return text


def config_hash(cfg):
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# --------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    config_hash: str | None = None
    version: str = __version__
    wall_time: float = 0.0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    outputs: list = field(default_factory=list)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add(self, *paths):
        for p in paths:
            self.outputs.append(str(p))

    def write(self, out_dir):
        self.wall_time = time.perf_counter() - self._t0
        path = Path(out_dir) / "manifest.json"
        self.outputs.append(str(path))
        data = {"command": self.command, "config_hash": self.config_hash,
                "version": self.version, "wall_time": self.wall_time,
                "tolerances": self.tolerances, "outputs": self.outputs}
        path.write_text(json.dumps(data, indent=2))
        return path


# -------------------------------------------------------------- snapshots

def read_snapshot(path_base):
    """Load a ``<base>.bin`` field and its ``<base>.json`` sidecar."""
    base = Path(path_base)
    meta = json.loads(base.with_suffix(".json").read_text())
    arr = np.fromfile(base.with_suffix(".bin"), dtype="<f8").reshape(meta["shape"])
    return arr, meta
