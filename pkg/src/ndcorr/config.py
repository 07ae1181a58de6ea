"""Run configuration: YAML sections validated against a fixed schema.

Errors carry ``file:line`` anchors taken from the YAML node marks.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

NUM = (int, float)

# section -> key -> (accepted types, default); a default of REQUIRED must be given.
REQUIRED = object()
SCHEMA = {
    "profile": {
        "kind": (str, REQUIRED),
        "a_inf": (NUM, None),
        "x_minus": (NUM, 0.5),
        "x_plus": (NUM, 1.5),
        "peak": (NUM, None),
        "table_path": (str, None),
    },
    "grid": {
        "L": (NUM, REQUIRED),
        "dx": (NUM, None),
        "nx": (int, None),
        "cfl": (NUM, 1.0),
        "t_max": (NUM, REQUIRED),
    },
    "input": {
        "start": (NUM, 0.1),
        "width": (NUM, 0.5),
        "mass": (NUM, 1.0),
    },
    "noise": {
        "seed": (int, REQUIRED),
        "delta": (NUM, None),
    },
    "correlation": {
        "T_list": (list, REQUIRED),
        "lag_min": (NUM, -0.5),
        "lag_max": (NUM, REQUIRED),
        "seeds": (int, 1),
        "blocks": (int, 8),
    },
    "energy": {
        "tau0": (NUM, None),
        "t_max": (NUM, None),
    },
    "reconstruction": {
        "a_max": (NUM, REQUIRED),
        "da": (NUM, None),
        "pulse_width": (NUM, 0.05),
        "tikhonov": ((int, float, str), 0.0),
        "mode": (str, "direct"),
        "T": (NUM, 2000.0),
        "seeds": (int, 5),
        "tolerance": (NUM, None),
        "compare": (bool, True),
    },
    "output": {
        "dir": (str, None),
        "field_every": (int, 0),
    },
}

COMMAND_SECTIONS = {
    "simulate": ("profile", "grid"),
    "correlate": ("profile", "grid", "noise", "correlation"),
    "energy": ("profile", "grid"),
    "reconstruct": ("profile", "grid", "reconstruction"),
    "demo": ("profile", "grid", "noise", "correlation", "reconstruction"),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: dict
    path: str = "<config>"
    lines: dict = field(default_factory=dict, repr=False)

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def has(self, name: str) -> bool:
        return name in self.data

    @property
    def hash(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def error(self, msg: str, *key) -> ConfigError:
        line = None
        while key and line is None:
            line = self.lines.get(tuple(key))
            key = key[:-1]
        where = f"{self.path}:{line}" if line else self.path
        return ConfigError(f"{where}: {msg}")


def _line_map(node, prefix=(), out=None) -> dict:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = prefix + (str(k.value),)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
    return out


def parse_config(text: str, path: str = "<config>") -> RunConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else path
        raise ConfigError(f"{where}: malformed YAML ({getattr(exc, 'problem', exc)})") from None
    if data is None:
        data = {}
    cfg = RunConfig({}, path, _line_map(root))
    if not isinstance(data, dict):
        raise cfg.error("top level must be a mapping of sections")
    cfg.data = copy.deepcopy(data)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))


def _type_ok(value, types) -> bool:
    types = types if isinstance(types, tuple) else (types,)
    if isinstance(value, bool):
        return bool in types
    return isinstance(value, types)


def validate(cfg: RunConfig, command: str) -> RunConfig:
    """Check every present section and fill defaults; required sections per command."""
    for name in cfg.data:
        if name not in SCHEMA:
            raise cfg.error(f"unknown section '{name}'", name)
    for name in COMMAND_SECTIONS[command]:
        if name not in cfg.data:
            raise cfg.error(f"missing required section '{name}' for '{command}'")
    for name, spec in SCHEMA.items():
        if name not in cfg.data:
            continue
        sec = cfg.data[name]
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            raise cfg.error(f"section '{name}' must be a mapping", name)
        for key in sec:
            if key not in spec:
                raise cfg.error(f"unknown key '{key}' in section '{name}'", name, key)
        for key, (types, default) in spec.items():
            if key not in sec:
                if default is REQUIRED:
                    raise cfg.error(f"missing required key '{key}' in section '{name}'", name)
                if default is not None:
                    sec[key] = default
                continue
            if not _type_ok(sec[key], types):
                raise cfg.error(f"key '{name}.{key}' has invalid value {sec[key]!r}", name, key)
        cfg.data[name] = sec
    _check_values(cfg)
    return cfg


def _check_values(cfg: RunConfig) -> None:
    g = cfg.data.get("grid")
    if g is not None:
        if ("dx" in g) == ("nx" in g):
            raise cfg.error("grid needs exactly one of 'dx' or 'nx'", "grid")
        if not 0 < g["cfl"] <= 1:
            raise cfg.error(f"grid.cfl = {g['cfl']} violates the CFL condition 0 < cfl <= 1",
                            "grid", "cfl")
        for key in ("L", "t_max", "dx", "nx"):
            if key in g and not g[key] > 0:
                raise cfg.error(f"grid.{key} must be positive", "grid", key)
    p = cfg.data.get("profile")
    if p is not None and p["kind"] == "tabulated" and "table_path" in p:
        tp = Path(p["table_path"])
        if not tp.is_absolute():
            p["table_path"] = str((Path(cfg.path).parent / tp).resolve())
    c = cfg.data.get("correlation")
    if c is not None:
        T = c["T_list"]
        if not T or not all(isinstance(v, NUM) and not isinstance(v, bool) and v > 0 for v in T):
            raise cfg.error("correlation.T_list must be a non-empty list of positive numbers",
                            "correlation", "T_list")
        if any(b <= a for a, b in zip(T, T[1:])):
            raise cfg.error("correlation.T_list must be increasing", "correlation", "T_list")
        if not c["lag_min"] < 0 < c["lag_max"]:
            raise cfg.error("need lag_min < 0 < lag_max", "correlation")
        if c["seeds"] < 1 or c["blocks"] < 2:
            raise cfg.error("correlation.seeds >= 1 and blocks >= 2 required", "correlation")
    r = cfg.data.get("reconstruction")
    if r is not None:
        if r["mode"] not in ("direct", "from-noise"):
            raise cfg.error("reconstruction.mode must be 'direct' or 'from-noise'",
                            "reconstruction", "mode")
        tk = r["tikhonov"]
        if isinstance(tk, str) and tk != "discrepancy" or not isinstance(tk, str) and tk < 0:
            raise cfg.error("reconstruction.tikhonov must be >= 0 or 'discrepancy'",
                            "reconstruction", "tikhonov")
        if r["a_max"] <= 0 or r["pulse_width"] <= 0 or r["seeds"] < 1:
            raise cfg.error("reconstruction needs a_max > 0, pulse_width > 0, seeds >= 1",
                            "reconstruction")
    n = cfg.data.get("noise")
    if n is not None:
        if n["seed"] < 0:
            raise cfg.error("noise.seed must be non-negative", "noise", "seed")
        if "delta" in n and not n["delta"] > 0:
            raise cfg.error("noise.delta must be positive", "noise", "delta")


DEFAULT_DEMO = """\
profile:
  kind: smoothstep
  a_inf: 2.0
  x_minus: 0.5
  x_plus: 1.5
grid:
  L: 2.0
  dx: 0.01
  cfl: 1.0
  t_max: 2010.0
input:
  start: 0.1
  width: 0.5
noise:
  seed: 0
correlation:
  T_list: [250, 1000, 2000]
  lag_min: -0.5
  lag_max: 4.4
  seeds: 1
energy:
  t_max: 12.0
reconstruction:
  a_max: 2.0
  da: 0.02
  pulse_width: 0.05
  T: 2000
  seeds: 1
"""
