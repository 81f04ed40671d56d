"""Command-line entry point.

Subcommands: ``run``, ``compare``, ``bound-check`` and ``sweep``. Exit codes are
0 on success, 1 on configuration errors and 2 when a run aborts numerically.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from . import config as cfgmod
from . import metrics as mt
from .errors import ConfigError, NumericalAbort
from .sim import COLUMNS, Scenario, TrajectoryRecord, run_scenario

log = logging.getLogger("gekf_esc")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2
BOUND_CURVE_POINTS = 1000


def emit_csv(rec: TrajectoryRecord, path: str | Path) -> None:
    """Write the record as CSV with full double precision (repr floats)."""
    path = Path(path)
    lines = [",".join(COLUMNS)]
    lines += [",".join(repr(float(v)) for v in row) for row in rec.data]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def read_csv(path: str | Path) -> TrajectoryRecord:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != ",".join(COLUMNS):
        raise ValueError(f"{path}: unexpected header")
    return TrajectoryRecord([[float(v) for v in ln.split(",")] for ln in text[1:] if ln])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# -- configuration -------------------------------------------------------------

def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigError(f"override {dotted!r} does not address a mapping")
    d[keys[-1]] = value


def load_config(path: str | None, name: str | None = None, overrides: Sequence[str] = ()) -> cfgmod.Config:
    """Parse the config; ``overrides`` are ``dotted.key=yaml_value`` edits applied to ``name``."""
    cfg = cfgmod.parse_config(path)
    if not overrides:
        return cfg
    if name is None:
        raise ConfigError("--set needs a scenario name")
    cfg.get(name)
    raw = copy.deepcopy(cfg.raw)
    body = raw["scenarios"][name]
    for item in overrides:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        _set_path(body, key.strip(), yaml.safe_load(val))
    # line numbers now refer to the re-serialised document, so label it as such
    return cfgmod.parse_config(text=yaml.safe_dump(raw, sort_keys=False),
                               path=f"{cfg.path} with --set overrides")


def apply_cli_options(sc: Scenario, seed: int | None = None, model: str | None = None) -> Scenario:
    if seed is not None:
        sc = replace(sc, seed=int(seed))
    if model is not None and sc.gekf is not None:
        sc = replace(sc, gekf=replace(sc.gekf, model=model))
    try:
        return sc.validate()
    except ValueError as exc:
        raise ConfigError(f"scenario {sc.name!r}: {exc}") from None


# -- commands --------------------------------------------------------------------

def _metrics(rec: TrajectoryRecord, sc: Scenario, eps: float) -> dict | None:
    if len(rec) < 2:
        return None
    return mt.compute_metrics(rec, sc.build_field(), sc.esc.omega, eps=eps).to_dict()


def _execute(sc: Scenario, backend: str | None, j_hook=None) -> tuple[TrajectoryRecord, str]:
    try:
        return run_scenario(sc, backend=backend, j_hook=j_hook), "ok"
    except NumericalAbort as exc:
        log.error("%s: %s", sc.name, exc)
        return exc.record, "aborted"


def _summary(sc: Scenario, rec: TrajectoryRecord, status: str, eps: float, metrics=False) -> dict:
    if metrics is False:
        metrics = _metrics(rec, sc, eps) if status == "ok" else None
    return {
        "name": sc.name,
        "status": status,
        "seed": int(sc.seed),
        "scenario_hash": sc.digest(),
        "scenario": sc.to_dict(),
        "metadata": rec.metadata,
        "metrics": metrics,
        "eps": eps,
    }


def cmd_run(cfg: cfgmod.Config, name: str, out: Path, seed: int | None = None, model: str | None = None,
            eps: float = 0.1, backend: str | None = None) -> int:
    sc = apply_cli_options(cfg.get(name), seed, model)
    out.mkdir(parents=True, exist_ok=True)
    rec, status = _execute(sc, backend)
    emit_csv(rec, out / f"{name}_trajectory.csv")
    _write_json(out / f"{name}_summary.json", _summary(sc, rec, status, eps))
    return EXIT_OK if status == "ok" else EXIT_ABORT


def _same_setup(a: Scenario, b: Scenario) -> bool:
    fa, fb = a.to_dict()["field"], b.to_dict()["field"]
    return fa == fb and tuple(a.p0) == tuple(b.p0)


def _delta(x, y):
    return None if x is None or y is None else x - y


def cmd_compare(cfg: cfgmod.Config, name_a: str, name_b: str, out: Path, seed: int | None = None,
                model: str | None = None, eps: float = 0.1, backend: str | None = None) -> int:
    a = apply_cli_options(cfg.get(name_a), seed, model)
    b = apply_cli_options(cfg.get(name_b), seed, model)
    if not _same_setup(a, b):
        raise ConfigError(f"cannot compare {name_a!r} and {name_b!r}: field or initial position differ")
    out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=2) as pool:
        (ra, sa), (rb, sb) = pool.map(lambda s: _execute(s, backend), (a, b))
    ma = _metrics(ra, a, eps) if sa == "ok" else None
    mb = _metrics(rb, b, eps) if sb == "ok" else None
    deltas = None
    if ma is not None and mb is not None:
        deltas = {
            "convergence_time": _delta(ma["convergence_time"], mb["convergence_time"]),
            "path_length": ma["path_length"] - mb["path_length"],
            "path_length_to_entry": _delta(ma["path_length_to_entry"], mb["path_length_to_entry"]),
            "final_distance": ma["final_distance"] - mb["final_distance"],
            "attenuation_ratio": ma["attenuation_ratio"] - mb["attenuation_ratio"],
            "attenuation_ratio_a": ma["attenuation_ratio"],
            "attenuation_ratio_b": mb["attenuation_ratio"],
        }
    result = {
        "a": _summary(a, ra, sa, eps, ma),
        "b": _summary(b, rb, sb, eps, mb),
        "deltas": deltas,
        "eps": eps,
    }
    _write_json(out / f"compare_{name_a}_{name_b}.json", result)
    return EXIT_OK if sa == sb == "ok" else EXIT_ABORT


def bound_report(rec: TrajectoryRecord, tail_fraction: float = 0.8) -> dict:
    t = rec.t
    rep = {"tail_fraction": tail_fraction}
    tp = t[t > 0]
    idx = np.unique(np.linspace(0, len(tp) - 1, min(BOUND_CURVE_POINTS, len(tp))).astype(int)) if len(tp) else []
    curve = {"t": tp[idx].tolist() if len(tp) else []}
    for ch in ("J_x", "J_y"):
        fit = mt.bound_fit(t, rec[ch], tail_fraction)
        rep[ch] = {"p": fit.p, "t_star": fit.t_star, "satisfied": fit.satisfied}
        if fit.p is not None and len(tp):
            curve[f"{ch}_bound"] = (tp[idx] ** -fit.p).tolist()
        curve[f"{ch}_abs"] = np.abs(rec[ch][t > 0][idx]).tolist() if len(tp) else []
    rep["satisfied"] = bool(rep["J_x"]["satisfied"] and rep["J_y"]["satisfied"])
    rep["bound_curve"] = curve
    return rep


def cmd_bound_check(cfg: cfgmod.Config, name: str, out: Path, seed: int | None = None,
                    model: str | None = None, tail_fraction: float = 0.8, backend: str | None = None,
                    j_hook: Callable | None = None) -> int:
    sc = apply_cli_options(cfg.get(name), seed, model)
    if not sc.esc.adaptive:
        raise ConfigError("bound check requires GEKF variant")
    out.mkdir(parents=True, exist_ok=True)
    rec, status = _execute(sc, backend, j_hook)
    rep = {"name": name, "status": status, "seed": int(sc.seed), "scenario_hash": sc.digest()}
    if status == "ok":
        rep |= bound_report(rec, tail_fraction)
    _write_json(out / f"bound_{name}.json", rep)
    return EXIT_OK if status == "ok" else EXIT_ABORT


def cmd_sweep(cfg: cfgmod.Config, name: str, param: str, values: Sequence[float], out: Path,
              seed: int | None = None, model: str | None = None, eps: float = 0.1,
              backend: str | None = None) -> int:
    base = apply_cli_options(cfg.get(name), seed, model)
    runs = []
    for v in values:
        if param == "omega":
            esc = replace(base.esc, omega=float(v))
        elif param == "lambda":
            esc = replace(base.esc, lambda_x=float(v), lambda_y=float(v))
        else:
            raise ConfigError(f"sweep parameter must be omega or lambda, got {param!r}")
        sc = apply_cli_options(replace(base, esc=esc, name=f"{name}[{param}={v}]"))
        rec, status = _execute(sc, backend)
        runs.append({"value": float(v), "status": status, "scenario_hash": sc.digest(),
                     "metrics": _metrics(rec, sc, eps) if status == "ok" else None})
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / f"sweep_{name}_{param}.json",
                {"name": name, "param": param, "seed": int(base.seed), "eps": eps, "runs": runs})
    return EXIT_OK if all(r["status"] == "ok" for r in runs) else EXIT_ABORT


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (default: bundled presets)")
    common.add_argument("--out", help="output directory (default: the config's output_dir)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--measurement-model", choices=("derived", "paper-literal"))
    common.add_argument("--backend", choices=("cython", "python"), help="integration kernel")
    common.add_argument("--eps", type=float, default=0.1, help="convergence radius for metrics")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario key, e.g. controller.lambda=-20")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="gekf-esc", description="Extremum seeking simulations with "
                                 "GEKF gradient estimation and amplitude adaptation.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one scenario")
    p.add_argument("scenario")
    p = sub.add_parser("compare", parents=[common], help="run two scenarios and compare metrics")
    p.add_argument("scenarios", nargs="*", help="two names; default: every pair listed in the config")
    p = sub.add_parser("bound-check", parents=[common], help="fit the decaying bound on |J|")
    p.add_argument("scenario")
    p.add_argument("--tail-fraction", type=float, default=0.8)
    p = sub.add_parser("sweep", parents=[common], help="repeat a scenario over omega or lambda")
    p.add_argument("scenario")
    p.add_argument("--param", choices=("omega", "lambda"), required=True)
    p.add_argument("--values", type=float, nargs="+", required=True)
    sub.add_parser("list", parents=[common], help="list scenarios in the config")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        name = getattr(args, "scenario", None)
        if args.command == "compare" and args.set and len(args.scenarios) == 2:
            raise ConfigError("--set is not supported with compare")
        cfg = load_config(args.config, name, args.set)
        out = Path(args.out or cfg.output_dir)
        opts = dict(seed=args.seed, model=args.measurement_model, backend=args.backend)
        if args.command == "run":
            return cmd_run(cfg, args.scenario, out, eps=args.eps, **opts)
        if args.command == "compare":
            if len(args.scenarios) == 2:
                pairs = [tuple(args.scenarios)]
            elif not args.scenarios:
                pairs = cfg.comparisons
                if not pairs:
                    raise ConfigError("no comparisons listed in the config")
            else:
                raise ConfigError("compare takes exactly two scenario names")
            for a, b in pairs:
                if not _same_setup(cfg.get(a), cfg.get(b)):
                    raise ConfigError(f"cannot compare {a!r} and {b!r}: field or initial position differ")
            codes = [cmd_compare(cfg, a, b, out, eps=args.eps, **opts) for a, b in pairs]
            return max(codes)
        if args.command == "bound-check":
            return cmd_bound_check(cfg, args.scenario, out, tail_fraction=args.tail_fraction, **opts)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.scenario, args.param, args.values, out, eps=args.eps, **opts)
        if args.command == "list":
            for n, sc in cfg.scenarios.items():
                print(f"{n}\t{sc.esc.variant}\t{sc.build_field().kind}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
