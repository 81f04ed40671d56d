"""YAML scenario configuration.

Layout::

    output_dir: out                 # optional
    scenarios:
      <name>:
        extends: <other name>       # optional, deep-merged over the parent
        field: {kind, peak, center, weights, width, waypoints}
        controller: {variant, omega, c, lambda, a0, filter_corners,
                     filter_target, filter_kind, alpha, j_mode}
        gekf: {t_out, substeps, P0, Q, R, measurement_model, joseph, dither_drive, x0}   # or null
        sensor: {noise_std}
        initial_position: [x, y]
        duration, dt, output_interval, measurement_cadence, seed, allow_unstable
    comparisons: [[a, b], ...]      # optional

Unknown keys are rejected. Pair-valued settings (``lambda``, ``a0``,
``filter_corners``, ``alpha``) also accept a single number for both axes.
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import field as fld
from . import gekf as gk
from .errors import ConfigError
from .esc import EscParams
from .sim import Scenario

PRESETS = "presets.yaml"

TOP_KEYS = {"output_dir", "scenarios", "comparisons"}
SCENARIO_KEYS = {"extends", "field", "controller", "gekf", "sensor", "initial_position", "duration",
                 "dt", "output_interval", "measurement_cadence", "seed", "allow_unstable"}
FIELD_KEYS = {"kind", "peak", "center", "weights", "width", "waypoints"}
CONTROLLER_KEYS = {"variant", "omega", "c", "lambda", "a0", "filter_corners", "filter_target",
                   "filter_kind", "alpha", "j_mode"}
GEKF_KEYS = {"t_out", "substeps", "P0", "Q", "R", "measurement_model", "joseph", "dither_drive", "x0"}
SENSOR_KEYS = {"noise_std"}
SECTION_KEYS = {"field": FIELD_KEYS, "controller": CONTROLLER_KEYS, "gekf": GEKF_KEYS,
                "sensor": SENSOR_KEYS}

# words in validation messages -> config key path inside a scenario
_MESSAGE_KEYS = [
    ("omega", ("controller", "omega")), ("lambda", ("controller", "lambda")),
    ("filter corners", ("controller", "filter_corners")), ("variant", ("controller", "variant")),
    ("filter_target", ("controller", "filter_target")), ("filter_kind", ("controller", "filter_kind")),
    ("j_mode", ("controller", "j_mode")),
    ("t_out", ("gekf", "t_out")), ("substeps", ("gekf", "substeps")), ("R must", ("gekf", "R")),
    ("Q must", ("gekf", "Q")), ("P0", ("gekf", "P0")), ("K vanishes", ("gekf", "t_out")),
    ("dither_drive", ("gekf", "dither_drive")),
    ("dt", ("dt",)), ("duration", ("duration",)), ("noise_std", ("sensor", "noise_std")),
    ("measurement_cadence", ("measurement_cadence",)), ("output_interval", ("output_interval",)),
    ("weights", ("field", "weights")), ("width", ("field", "width")),
    ("waypoint", ("field", "waypoints")), ("field kind", ("field", "kind")),
    ("center", ("field", "center")),
]


@dataclass
class Config:
    scenarios: dict[str, Scenario]
    output_dir: str = "out"
    comparisons: list[tuple[str, str]] = dc_field(default_factory=list)
    path: str | None = None
    raw: dict = dc_field(default_factory=dict)

    def get(self, name: str) -> Scenario:
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"unknown scenario {name!r}; available: {sorted(self.scenarios)}",
                              path=self.path) from None


def preset_path() -> Path:
    return Path(str(resources.files("gekf_esc").joinpath(PRESETS)))


def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    """Map key paths to 1-based source lines by walking the composed YAML tree."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


def _first_duplicate(node) -> tuple[str, int] | None:
    """First mapping key that repeats within its mapping, with its line."""
    if isinstance(node, yaml.MappingNode):
        seen = set()
        for k, v in node.value:
            if k.value in seen:
                return k.value, k.start_mark.line + 1
            seen.add(k.value)
            found = _first_duplicate(v)
            if found:
                return found
    elif isinstance(node, yaml.SequenceNode):
        for v in node.value:
            found = _first_duplicate(v)
            if found:
                return found
    return None


def parse_config(path: str | Path | None = None, text: str | None = None, strict: bool = True) -> Config:
    """Load, merge and validate a configuration file (default: bundled presets)."""
    if text is None:
        path = preset_path() if path is None else Path(path)
        if not Path(path).is_file():
            raise ConfigError("config file not found", path=str(path))
        text = Path(path).read_text()
    src = str(path) if path is not None else "<config>"
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", line=mark.line + 1 if mark else None,
                          path=src) from None
    lines = _line_map(node) if node is not None else {}
    raw = raw or {}
    dup = _first_duplicate(node)
    if dup is not None:
        raise ConfigError(f"duplicate key {dup[0]!r}", line=dup[1], path=src)

    def fail(msg, keypath=()):
        line = None
        for n in range(len(keypath), -1, -1):
            if tuple(keypath[:n]) in lines:
                line = lines[tuple(keypath[:n])]
                break
        raise ConfigError(msg, line=line, path=src)

    if not isinstance(raw, dict):
        fail("top level must be a mapping")
    if strict:
        for k in raw:
            if k not in TOP_KEYS:
                fail(f"unknown key {k!r}", (k,))
    scen_raw = raw.get("scenarios") or {}
    if not isinstance(scen_raw, dict) or not scen_raw:
        fail("'scenarios' must be a non-empty mapping", ("scenarios",))

    resolved: dict[str, dict] = {}

    def resolve(name, stack=()):
        if name in resolved:
            return resolved[name]
        if name in stack:
            fail(f"circular 'extends' chain: {' -> '.join(stack + (name,))}", ("scenarios", name))
        body = scen_raw.get(name)
        if not isinstance(body, dict):
            fail(f"scenario {name!r} must be a mapping", ("scenarios", name))
        if strict:
            _check_keys(body, name, fail)
        parent = body.get("extends")
        base = {}
        if parent is not None:
            if parent not in scen_raw:
                fail(f"'extends' refers to unknown scenario {parent!r}", ("scenarios", name, "extends"))
            base = copy.deepcopy(resolve(parent, stack + (name,)))
        merged = _merge(base, {k: v for k, v in body.items() if k != "extends"})
        resolved[name] = merged
        return merged

    scenarios = {}
    for name in scen_raw:
        body = resolve(name)
        try:
            scenarios[name] = scenario_from_dict(name, body)
            scenarios[name].validate()
        except (ValueError, TypeError, KeyError) as exc:
            msg = str(exc)
            kp = ("scenarios", name)
            for word, sub in _MESSAGE_KEYS:
                if re.search(rf"\b{re.escape(word)}", msg):
                    kp = ("scenarios", name) + sub
                    break
            fail(f"scenario {name!r}: {msg}", kp)

    comparisons = []
    for i, pair in enumerate(raw.get("comparisons") or []):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            fail("each comparison must be a pair of scenario names", ("comparisons", i))
        for n in pair:
            if n not in scenarios:
                fail(f"comparison refers to unknown scenario {n!r}", ("comparisons", i))
        comparisons.append((pair[0], pair[1]))
    return Config(scenarios, str(raw.get("output_dir", "out")), comparisons, src, raw)


def _check_keys(body, name, fail):
    for k, v in body.items():
        if k not in SCENARIO_KEYS:
            fail(f"unknown key {k!r} in scenario {name!r}", ("scenarios", name, k))
        if k in SECTION_KEYS and v is not None:
            if not isinstance(v, dict):
                fail(f"{k!r} must be a mapping", ("scenarios", name, k))
            for kk in v:
                if kk not in SECTION_KEYS[k]:
                    fail(f"unknown key {kk!r} in {name}.{k}", ("scenarios", name, k, kk))


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _pair(v, name) -> tuple[float, float]:
    if isinstance(v, (int, float)):
        return (float(v), float(v))
    try:
        a, b = v
        return (float(a), float(b))
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number or a pair, got {v!r}") from None


def _matrix5(v, name) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(5)
    if arr.shape == (5,):
        return np.diag(arr)
    if arr.shape == (5, 5):
        return arr
    raise ValueError(f"{name} must be a scalar, a length-5 diagonal or a 5x5 matrix")


def scenario_from_dict(name: str, d: dict[str, Any]) -> Scenario:
    ctl = d.get("controller") or {}
    base = EscParams()
    lam = _pair(ctl.get("lambda", (base.lambda_x, base.lambda_y)), "lambda")
    a0 = _pair(ctl.get("a0", (base.a_x0, base.a_y0)), "a0")
    hs = _pair(ctl.get("filter_corners", (base.h1, base.h2)), "filter_corners")
    alpha = ctl.get("alpha")
    esc = EscParams(
        omega=float(ctl.get("omega", base.omega)), c=float(ctl.get("c", base.c)),
        lambda_x=lam[0], lambda_y=lam[1], a_x0=a0[0], a_y0=a0[1],
        variant=ctl.get("variant", base.variant), h1=hs[0], h2=hs[1],
        filter_target=ctl.get("filter_target", base.filter_target),
        filter_kind=ctl.get("filter_kind", base.filter_kind),
        alpha=None if alpha is None else _pair(alpha, "alpha"),
        j_mode=ctl.get("j_mode", base.j_mode),
    )
    gd = d.get("gekf", {}) if "gekf" in d else {}
    gekf = None
    P0 = (4.0,) * 5
    x0 = None
    if gd is not None:
        g0 = gk.GekfParams()
        gekf = gk.GekfParams(
            t_out=float(gd.get("t_out", g0.t_out)), substeps=int(gd.get("substeps", g0.substeps)),
            Q=_matrix5(gd.get("Q", 0.05), "Q"), R=float(gd.get("R", g0.R)),
            model=gd.get("measurement_model", g0.model), joseph=bool(gd.get("joseph", g0.joseph)),
            dither_drive=gd.get("dither_drive", g0.dither_drive),
        )
        P0 = tuple(float(v) for v in np.atleast_1d(gd.get("P0", P0)))
        if len(P0) == 1:
            P0 = P0 * 5
        if len(P0) != 5:
            raise ValueError("P0 must be a scalar or a length-5 diagonal")
        if gd.get("x0") is not None:
            x0 = tuple(float(v) for v in gd["x0"])
            if len(x0) != 5:
                raise ValueError("gekf x0 must have 5 entries")
    fd = dict(d.get("field") or {})
    fld.build_field(fd)
    sensor = d.get("sensor") or {}
    return Scenario(
        name=name, field=fd, esc=esc, gekf=gekf, gekf_P0=P0, gekf_x0=x0,
        noise_std=float(sensor.get("noise_std", 0.0)),
        p0=_pair(d.get("initial_position", (2.0, 2.0)), "initial_position"),
        duration=float(d.get("duration", 100.0)), dt=float(d.get("dt", 1e-3)),
        output_interval=float(d.get("output_interval", 0.01)),
        measurement_cadence=d.get("measurement_cadence", "fine"), seed=int(d.get("seed", 0)),
        allow_unstable=bool(d.get("allow_unstable", False)),
    )


def _num(v: float):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully resolved scenario in config-file form (defaults included)."""
    f = sc.build_field()
    fd = {"kind": f.kind, "peak": f.peak, "center": list(f.center)}
    if f.kind == "quadratic":
        fd["weights"] = list(f.weights)
    elif f.kind != "custom":
        fd["width"] = f.width
    fd["waypoints"] = [[t, list(c)] for t, c in f.waypoints]
    e = sc.esc
    out = {
        "field": fd,
        "controller": {
            "variant": e.variant, "omega": e.omega, "c": e.c, "lambda": [e.lambda_x, e.lambda_y],
            "a0": [e.a_x0, e.a_y0], "filter_corners": [e.h1, e.h2], "filter_target": e.filter_target,
            "filter_kind": e.filter_kind, "alpha": list(e.alphas),
            "j_mode": e.j_mode,
        },
        "gekf": None,
        "sensor": {"noise_std": sc.noise_std},
        "initial_position": list(sc.p0),
        "duration": sc.duration, "dt": sc.dt, "output_interval": sc.output_interval,
        "measurement_cadence": sc.measurement_cadence, "seed": int(sc.seed),
        "allow_unstable": bool(sc.allow_unstable),
    }
    if sc.gekf is not None:
        g = sc.gekf
        out["gekf"] = {
            "t_out": g.t_out, "substeps": int(g.substeps), "P0": list(sc.gekf_P0),
            "Q": np.asarray(g.Q, dtype=float).tolist(), "R": g.R, "measurement_model": g.model,
            "joseph": bool(g.joseph), "dither_drive": g.dither_drive,
            "x0": None if sc.gekf_x0 is None else list(sc.gekf_x0),
        }
    return _jsonable(out)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if isinstance(v, np.integer):
        return int(v)
    return v
