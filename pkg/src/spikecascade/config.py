"""Flat JSON experiment configs.

A config is one JSON object with scalar or list values; there is no
nesting and no inheritance.  Unknown keys and wrong types are rejected
with the offending field name.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .delayed import DelayedConfig
from .errors import ConfigError
from .particles import DriftSpec, InitialLaw, SimConfig

MODES = ("particles", "delayed", "sweep", "compare", "cascade-check")

# key -> accepted python types
_SCHEMA = {
    "n": (int,),
    "replicas": (int,),
    "horizon": (int, float),
    "dt": (int, float),
    "alpha": (int, float),
    "delta": (int, float),
    "drift": (str,),
    "drift_c": (int, float),
    "drift_a": (int, float),
    "drift_b": (int, float),
    "drift_breakpoints": (list,),
    "init": (str,),
    "init_x0": (int, float),
    "init_lo": (int, float),
    "init_hi": (int, float),
    "init_mu": (int, float),
    "init_sigma": (int, float),
    "init_values": (list,),
    "epsilon0": (int, float),
    "noise_scale": (int, float),
    "seed": (int,),
    "seeds": (list,),
    "record_trajectories": (bool,),
    "record_count": (int,),
    "capture_fraction": (int, float),
    "sweep_axis": (str,),
    "sweep": (list,),
    "reference_n": (int,),
    "jump_threshold": (int, float),
    "bandwidth": (int, float),
    "m1_resolution": (int,),
    "potentials": (list,),
    "state_file": (str,),
}


@dataclass
class ExperimentSpec:
    mode: str
    particle: SimConfig | None = None
    delayed: DelayedConfig | None = None
    sweep_axis: str | None = None
    sweep: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "out"
    reference_n: int | None = None
    jump_threshold: float = 0.05
    bandwidth: float | None = None
    m1_resolution: int = 2000
    potentials: list | None = None
    raw: dict = field(default_factory=dict)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}", field="mode")
        if not self.seeds:
            raise ConfigError("seed list is empty", field="seeds")
        if self.mode == "sweep":
            if self.sweep_axis not in ("n", "delta"):
                raise ConfigError("sweep_axis must be 'n' or 'delta'", field="sweep_axis")
            if not self.sweep:
                raise ConfigError("sweep list is empty", field="sweep")
        if self.mode == "compare" and not self.sweep:
            raise ConfigError("compare needs a non-empty list of deltas", field="sweep")
        if not 0.0 < self.jump_threshold < 1.0:
            raise ConfigError("jump_threshold must lie in (0, 1)", field="jump_threshold")
        if self.m1_resolution < 2:
            raise ConfigError("m1_resolution must be >= 2", field="m1_resolution")
        if self.mode == "cascade-check" and not self.potentials:
            raise ConfigError("cascade-check needs a non-empty state", field="potentials")
        for cfg in (self.particle, self.delayed):
            if cfg is not None:
                cfg.validate()
        if self.mode in ("sweep", "compare"):
            for v in self.sweep:
                self.config_for(v).validate()

    def config_for(self, value, seed=None):
        """Base config with one sweep value (and optionally a seed) applied."""
        if self.mode == "compare" or self.sweep_axis == "delta":
            cfg = replace(self.delayed, delta=float(value))
        else:
            cfg = replace(self.particle, n=int(value))
        return cfg if seed is None else cfg.with_seed(seed)


def _typed(raw: dict, key: str):
    val = raw[key]
    want = _SCHEMA[key]
    if isinstance(val, bool) and bool not in want:
        raise ConfigError(f"expected {'/'.join(t.__name__ for t in want)}, got bool",
                          field=key)
    if not isinstance(val, want):
        raise ConfigError(f"expected {'/'.join(t.__name__ for t in want)}, "
                          f"got {type(val).__name__}", field=key)
    return val


def _get(raw, key, default):
    return _typed(raw, key) if key in raw else default


def _drift(raw) -> DriftSpec:
    pts = _get(raw, "drift_breakpoints", [])
    try:
        pts = tuple(tuple(float(v) for v in p) for p in pts)
    except (TypeError, ValueError):
        raise ConfigError("breakpoints must be a list of [x, y] pairs",
                          field="drift_breakpoints") from None
    return DriftSpec(kind=_get(raw, "drift", "zero"), c=float(_get(raw, "drift_c", 0.0)),
                     a=float(_get(raw, "drift_a", 0.0)), b=float(_get(raw, "drift_b", 0.0)),
                     breakpoints=pts)


def _init(raw) -> InitialLaw:
    vals = _get(raw, "init_values", [])
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        raise ConfigError("init_values must be numbers", field="init_values")
    return InitialLaw(kind=_get(raw, "init", "point"), x0=float(_get(raw, "init_x0", 0.0)),
                      lo=float(_get(raw, "init_lo", 0.0)), hi=float(_get(raw, "init_hi", 0.0)),
                      mu=float(_get(raw, "init_mu", 0.0)),
                      sigma=float(_get(raw, "init_sigma", 1.0)),
                      values=tuple(float(v) for v in vals),
                      epsilon0=float(_get(raw, "epsilon0", 0.01)))


def _require(raw, *keys):
    for k in keys:
        if k not in raw:
            raise ConfigError("missing required key", field=k)


def _seeds(raw):
    if "seeds" in raw:
        seeds = _typed(raw, "seeds")
        if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
            raise ConfigError("seeds must be non-negative integers", field="seeds")
        return list(seeds)
    return [int(_get(raw, "seed", 0))]


def _read_state_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read state file: {exc}", field="state_file") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = text.replace(",", " ").split()
    try:
        return [float(v) for v in data]
    except (TypeError, ValueError):
        raise ConfigError("state file must hold a list of numbers", field="state_file") from None


def parse_config(raw: dict, mode: str, out_dir: str = "out") -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", field="<root>")
    for key in raw:
        if key not in _SCHEMA:
            raise ConfigError("unknown key", field=key)
    spec = ExperimentSpec(mode=mode, out_dir=out_dir, raw=dict(raw), seeds=_seeds(raw))
    spec.jump_threshold = float(_get(raw, "jump_threshold", 0.05))
    spec.bandwidth = float(raw["bandwidth"]) if "bandwidth" in raw else None
    spec.m1_resolution = int(_get(raw, "m1_resolution", 2000))

    if mode == "cascade-check":
        _require(raw, "alpha")
        if "potentials" in raw:
            pots = _typed(raw, "potentials")
        elif "state_file" in raw:
            pots = _read_state_file(_typed(raw, "state_file"))
        else:
            raise ConfigError("give potentials or state_file", field="potentials")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pots):
            raise ConfigError("potentials must be numbers", field="potentials")
        spec.potentials = [float(v) for v in pots]
        spec.validate()
        return spec

    _require(raw, "horizon", "dt", "alpha")
    common = dict(horizon=float(_typed(raw, "horizon")), dt=float(_typed(raw, "dt")),
                  alpha=float(_typed(raw, "alpha")), drift=_drift(raw), init=_init(raw),
                  noise_scale=float(_get(raw, "noise_scale", 1.0)), seed=spec.seeds[0])
    spec.sweep_axis = _get(raw, "sweep_axis", None)
    spec.sweep = list(_get(raw, "sweep", []))
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in spec.sweep):
        raise ConfigError("sweep values must be numbers", field="sweep")

    needs_particles = mode == "particles" or (mode == "sweep" and spec.sweep_axis == "n")
    needs_delayed = (mode in ("delayed", "compare")
                     or (mode == "sweep" and spec.sweep_axis == "delta"))
    if needs_particles:
        if mode == "particles":
            _require(raw, "n")
        n = int(_get(raw, "n", spec.sweep[0] if spec.sweep else 1))
        spec.particle = SimConfig(
            n=n, record_trajectories=bool(_get(raw, "record_trajectories", False)),
            record_count=int(_get(raw, "record_count", 100)),
            capture_fraction=float(_get(raw, "capture_fraction", 0.05)), **common)
    if needs_delayed:
        _require(raw, "replicas")
        if mode == "delayed":
            _require(raw, "delta")
        delta = float(_get(raw, "delta", spec.sweep[0] if spec.sweep else common["dt"]))
        spec.delayed = DelayedConfig(delta=delta, replicas=int(_typed(raw, "replicas")),
                                     record_count=int(_get(raw, "record_count", 0)), **common)
    if mode == "compare":
        _require(raw, "reference_n")
        spec.reference_n = int(_typed(raw, "reference_n"))
        spec.particle = SimConfig(n=spec.reference_n, record_trajectories=False,
                                  capture_fraction=float(_get(raw, "capture_fraction", 0.05)),
                                  **common)
    spec.validate()
    return spec


def load_config(path: str, mode: str, out_dir: str = "out") -> ExperimentSpec:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="--config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", field="--config") from None
    return parse_config(raw, mode, out_dir)
