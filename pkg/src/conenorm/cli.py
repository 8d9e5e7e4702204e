"""Batch front end: read a JSON job, run a calculator or the oracle, print a report.

Exit codes: 0 success, 1 malformed config, 2 failed precondition, 3 verification FAIL.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from .cone import ConeSpec, Variant
from .grid import GridConfig
from .hardy import HardyProblem, PreconditionError, hardy_bounds
from .measure import (INF, CumulativeRule, DensityRule, ExpDensity, GammaDensity, Interval, Measure,
                      ParameterError, PowerDensity, TabulatedDensity)
from .normcalc import (DegenerateError, NormProblem, NormReport, associate_norm, dilation_norm,
                       gamma_embedding, lambda_embedding, restriction_norm)
from .operators import Dilation, Hardy, Identity, Kernel
from .oracle import OracleConfig, brute_norm, compare, truncation_drift
from .rearrange import StepFunction
from .shapes import ONE, ConstShape, ExprShape, PowerShape, Shape, compile_expr

REPORT_SCHEMA_ID = "conenorm.report/1"
CONFIG_SCHEMA_ID = "conenorm.job/1"
COMMANDS = ("norm", "associate", "dilation", "embed-lambda", "embed-gamma", "hardy", "verify")

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_FAIL = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


# -- schemas ----------------------------------------------------------------------

_EXTENDED = {"anyOf": [{"type": "number"}, {"enum": ["inf", "Infinity", "+inf"]}]}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INTERVAL = {"type": "array", "items": [{"type": "number"}, {"anyOf": [_EXTENDED, {"type": "null"}]}],
             "minItems": 2, "maxItems": 2}

_MEASURE = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["power", "exp", "gamma", "tabulated", "expr", "lebesgue"]},
        "alpha": {"type": "number"}, "rate": _POS, "c": _POS,
        "grid": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
        "density": {"type": "string"}, "cumulative": {"type": "string"},
        "interval": _INTERVAL,
        "atoms": {},
    },
    "additionalProperties": False,
}

_SHAPE = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["const", "power", "expr"]}, "c": _POS, "kappa": {"type": "number"},
                   "expr": {"type": "string"}},
    "additionalProperties": False,
}

_CONE = {
    "type": "object",
    "properties": {"interval": _INTERVAL, "k": _SHAPE, "variant": {"enum": ["omega", "omega_dot"]}},
    "additionalProperties": False,
}

_OPERATOR = {
    "type": "object",
    "required": ["op"],
    "properties": {"op": {"enum": ["identity", "hardy", "kernel", "dilation"]}, "r": _POS, "mu": _MEASURE,
                   "kernel": {"type": "string"}, "cells": {"type": "integer", "minimum": 2},
                   "m": _POS, "n": {"type": "integer", "minimum": 1}},
    "additionalProperties": False,
}

_STEP = {
    "type": "object",
    "required": ["knots", "values"],
    "properties": {"knots": {"type": "array", "items": {"type": "number"}},
                   "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                   "tail": {"type": "number", "minimum": 0}, "start": {"type": "number"}},
    "additionalProperties": False,
}

_NORM = {"operator": _OPERATOR, "cone": _CONE, "p": _POS, "q": _POS, "beta": _MEASURE, "gamma": _MEASURE}
_HARDY = {"p": _POS, "q": _POS, "r": _POS, "k": _SHAPE, "beta": _MEASURE, "gamma": _MEASURE, "mu": _MEASURE,
          "b": _EXTENDED}

_PROBLEMS = {
    "norm": ({**_NORM}, ["operator", "p", "q", "gamma"]),
    "associate": ({"f": _STEP, "k": _SHAPE, "p": _POS}, ["f"]),
    "dilation": ({"v": _MEASURE, "p": _POS, "n": {"type": "integer", "minimum": 1}, "m": _POS}, ["v", "p"]),
    "embed-lambda": ({"v": _MEASURE, "w": _MEASURE, "p": _POS, "q": _POS}, ["v", "w", "p", "q"]),
    "embed-gamma": ({"v": _MEASURE, "gamma": _MEASURE, "mu": _MEASURE, "p": _POS, "q": _POS, "r": _POS},
                    ["v", "gamma", "p", "q", "r"]),
    "hardy": ({**_HARDY}, ["p", "q", "r", "gamma"]),
    "verify": ({**_NORM, **_HARDY, "target": {"enum": ["norm", "hardy"]}, "bound_factor": _POS,
                "grid_tolerance": _POS, "drift_check": {"type": "boolean"}}, []),
}

_SETTINGS = {
    "schema": {"type": "string"},
    "command": {"enum": list(COMMANDS)},
    "output": {"enum": ["json", "csv", "table"]},
    "grid": {"type": "object", "additionalProperties": False,
             "properties": {"points": {"type": "integer", "minimum": 8}, "span": _POS, "U": _POS,
                            "refine_iters": {"type": "integer", "minimum": 0}}},
    "oracle": {"type": "object", "additionalProperties": False,
               "properties": {"samples": {"type": "integer", "minimum": 1},
                              "pieces_max": {"type": "integer", "minimum": 1},
                              "hill_climb_steps": {"type": "integer", "minimum": 0},
                              "seed": {"type": "integer", "minimum": 0},
                              "extremal_points": {"type": "integer", "minimum": 2},
                              "quad_points": {"type": "integer", "minimum": 8}}},
}


def config_schema(command: str) -> dict:
    props, required = _PROBLEMS[command]
    return {"type": "object", "required": ["command", *required], "properties": {**_SETTINGS, **props},
            "additionalProperties": False}


_NUM_OUT = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}, {"type": "null"}]}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema", "command", "value", "settings"],
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "command": {"enum": list(COMMANDS)},
        "value": _NUM_OUT,
        "arg_sup": _NUM_OUT,
        "branch": {"type": "string"},
        "applicability": {"type": "boolean"},
        "endpoint_included": {"type": "boolean"},
        "attained_in_limit": {"type": "boolean"},
        "details": {"type": "object"},
        "bounds": {"type": "object"},
        "verdict": {"type": "object", "required": ["status", "closed", "oracle"],
                    "properties": {"status": {"enum": ["PASS", "PASS-with-note", "FAIL", "INCONCLUSIVE"]}}},
        "settings": {"type": "object"},
    },
}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def validate_config(cfg) -> str:
    if not isinstance(cfg, dict):
        raise ConfigError("", "config must be a JSON object")
    command = cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError("/command", f"must be one of {', '.join(COMMANDS)}")
    err = jsonschema.exceptions.best_match(jsonschema.Draft7Validator(config_schema(command)).iter_errors(cfg))
    if err is not None:
        raise ConfigError(_pointer(err.absolute_path), err.message)
    return command


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


# -- builders ---------------------------------------------------------------------

def _extended(x) -> float:
    if x is None or isinstance(x, str):
        return INF
    return float(x)


def build_interval(spec, default: Interval | None = None) -> Interval:
    if spec is None:
        return default or Interval()
    return Interval(float(spec[0]), _extended(spec[1]))


def build_measure(spec: dict, where: str, interval: Interval | None = None) -> Measure:
    if "atoms" in spec:
        raise ConfigError(f"{where}/atoms", "measures must be nonatomic")
    iv = build_interval(spec.get("interval"), interval)
    kind = spec["kind"]
    c = spec.get("c", 1.0)
    try:
        if kind == "lebesgue":
            return PowerDensity(0.0, c, iv)
        if kind == "power":
            return PowerDensity(spec.get("alpha", 0.0), c, iv)
        if kind == "exp":
            return ExpDensity(_need(spec, "rate", where), c, iv)
        if kind == "gamma":
            return GammaDensity(_need(spec, "alpha", where), _need(spec, "rate", where), c, iv)
        if kind == "tabulated":
            return TabulatedDensity(np.array(_need(spec, "grid", where)), np.array(_need(spec, "values", where)), iv)
        if "density" in spec:
            fn = compile_expr(spec["density"], ("t",))
            return DensityRule(lambda t, f=fn, c=c: c * np.asarray(f(t), dtype=float), iv, spec["density"])
        if "cumulative" in spec:
            fn = compile_expr(spec["cumulative"], ("t",))
            return CumulativeRule(lambda t, f=fn, c=c: c * np.asarray(f(t), dtype=float), iv, spec["cumulative"])
    except (ParameterError, ValueError, SyntaxError) as exc:
        raise ConfigError(where, str(exc)) from exc
    raise ConfigError(where, "expr measures need a 'density' or 'cumulative' expression")


def _need(spec, key, where):
    if key not in spec:
        raise ConfigError(f"{where}/{key}", "required")
    return spec[key]


def build_shape(spec: dict | None, where: str) -> Shape:
    if spec is None:
        return ONE
    try:
        if spec["kind"] == "const":
            return ConstShape(spec.get("c", 1.0))
        if spec["kind"] == "power":
            return PowerShape(spec.get("kappa", 0.0), spec.get("c", 1.0))
        return ExprShape(_need(spec, "expr", where))
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(where, str(exc)) from exc


def build_cone(spec: dict | None) -> ConeSpec:
    spec = spec or {}
    return ConeSpec(build_interval(spec.get("interval")), build_shape(spec.get("k"), "/cone/k"),
                    Variant(spec.get("variant", "omega")))


def build_operator(spec: dict, interval: Interval):
    op = spec["op"]
    if op == "identity":
        return Identity()
    if op == "dilation":
        return Dilation(spec.get("m", 2.0), spec.get("n", 1))
    mu = build_measure(spec["mu"], "/operator/mu", interval) if "mu" in spec else PowerDensity(0.0, 1.0, interval)
    r = spec.get("r", 1.0)
    if op == "hardy":
        return Hardy(r, mu)
    expr = _need(spec, "kernel", "/operator")
    try:
        fn = compile_expr(expr, ("x", "t"))
    except (ValueError, SyntaxError) as exc:
        raise ConfigError("/operator/kernel", str(exc)) from exc
    return Kernel(r, mu, fn, spec.get("cells", 256), expr)


def build_norm_problem(cfg: dict) -> NormProblem:
    cone = build_cone(cfg.get("cone"))
    iv = cone.interval
    beta = build_measure(cfg["beta"], "/beta", iv) if "beta" in cfg else PowerDensity(0.0, 1.0, iv)
    gamma = build_measure(_need(cfg, "gamma", ""), "/gamma", iv)
    op = build_operator(_need(cfg, "operator", ""), iv)
    return NormProblem(op, cone, _need(cfg, "p", ""), beta, _need(cfg, "q", ""), gamma)


def build_hardy_problem(cfg: dict) -> HardyProblem:
    b = _extended(cfg.get("b", "inf"))
    iv = Interval(0.0, b)
    beta = build_measure(cfg["beta"], "/beta", iv) if "beta" in cfg else PowerDensity(0.0, 1.0, iv)
    mu = build_measure(cfg["mu"], "/mu", iv) if "mu" in cfg else PowerDensity(0.0, 1.0, iv)
    gamma = build_measure(_need(cfg, "gamma", ""), "/gamma", iv)
    return HardyProblem(_need(cfg, "p", ""), _need(cfg, "q", ""), _need(cfg, "r", ""), gamma,
                        build_shape(cfg.get("k"), "/k"), beta, mu, b)


def build_step(spec: dict, k: Shape) -> StepFunction:
    try:
        return StepFunction(spec["knots"], spec["values"], spec.get("start", 0.0), spec.get("tail", 0.0),
                            None if k.is_const else k)
    except ValueError as exc:
        raise ConfigError("/f", str(exc)) from exc


@dataclass
class Job:
    command: str
    raw: dict
    output: str = "json"
    grid: GridConfig = field(default_factory=GridConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)


def make_job(cfg: dict, output=None, seed=None, grid_points=None, grid_span=None, samples=None) -> Job:
    command = validate_config(cfg)
    g = cfg.get("grid", {})
    grid_kw = {"points": g.get("points"), "span": g.get("span", g.get("U")), "refine_iters": g.get("refine_iters")}
    grid_kw.update({"points": grid_points or grid_kw["points"], "span": grid_span or grid_kw["span"]})
    grid = GridConfig(**{k: v for k, v in grid_kw.items() if v is not None})
    okw = dict(cfg.get("oracle", {}))
    if seed is not None:
        okw["seed"] = seed
    if samples is not None:
        okw["samples"] = samples
    return Job(command, cfg, output or cfg.get("output", "json"), grid, OracleConfig(**okw))


# -- execution --------------------------------------------------------------------

def _from_norm_report(rep: NormReport) -> dict:
    return {"value": rep.value, "arg_sup": rep.arg_sup, "branch": rep.branch,
            "applicability": bool(rep.applicability), "endpoint_included": bool(rep.endpoint_included),
            "attained_in_limit": bool(rep.attained_in_limit), "details": rep.details}


def _verdict_dict(v) -> dict:
    return {"status": v.status, "upper_ok": bool(v.upper_ok), "lower_ok": bool(v.lower_ok), "closed": v.closed,
            "oracle": v.oracle, "ratio": v.ratio, "exact_regime": bool(v.exact_regime), "drift": v.drift,
            "notes": list(v.notes)}


def _verify(job: Job) -> dict:
    cfg = job.raw
    target = cfg.get("target", "norm" if "operator" in cfg else "hardy")
    grid = job.grid
    extra = {}
    if target == "hardy":
        hp = build_hardy_problem(cfg)
        bounds = hardy_bounds(hp, grid)
        prob = hp.as_norm_problem()
        closed = restriction_norm(prob, grid)
        if not hp.exact_regime:
            # only the shape of the upper bound is known; compare against a multiple of it
            factor = cfg.get("bound_factor", 20.0)
            closed = replace(closed, value=factor * bounds.upper_shape, applicability=False)
            extra["bound_factor"] = factor
        extra["bounds"] = _bounds_dict(bounds)
    else:
        prob = build_norm_problem(cfg)
        closed = restriction_norm(prob, grid)
    oracle = brute_norm(prob, job.oracle, grid)
    drift = truncation_drift(prob, job.oracle, grid) if cfg.get("drift_check", False) else None
    verdict = compare(closed, oracle, cfg.get("grid_tolerance", 1e-3), drift)
    out = _from_norm_report(closed)
    out["verdict"] = _verdict_dict(verdict)
    out["details"] = {**out["details"], "oracle_source": oracle.best_source,
                      "oracle_extremal_best": oracle.extremal_best, "oracle_sample_best": oracle.sample_best,
                      "oracle_extremal_margin": oracle.extremal_margin, "target": target}
    if "bounds" in extra:
        out["bounds"] = extra.pop("bounds")
    out["details"].update(extra)
    return out


def _bounds_dict(b) -> dict:
    return {"exact": b.exact, "lower": b.lower, "upper_shape": b.upper_shape,
            "e": None if b.e is None else float(b.e), "f": None if b.f is None else float(b.f),
            "e_plus_f": None if b.e_plus_f is None else float(b.e_plus_f), "regime": b.regime}


def execute(job: Job) -> dict:
    """Run the job and return the report dictionary (without the settings block)."""
    cfg, grid = job.raw, job.grid
    cmd = job.command
    if cmd == "norm":
        return _from_norm_report(restriction_norm(build_norm_problem(cfg), grid))
    if cmd == "associate":
        k = build_shape(cfg.get("k"), "/k")
        return _from_norm_report(associate_norm(build_step(cfg["f"], k), k, cfg.get("p", 1.0), grid))
    if cmd == "dilation":
        v = build_measure(cfg["v"], "/v")
        return _from_norm_report(dilation_norm(v, cfg["p"], cfg.get("n", 1), cfg.get("m", 2.0), grid))
    if cmd == "embed-lambda":
        v, w = build_measure(cfg["v"], "/v"), build_measure(cfg["w"], "/w")
        return _from_norm_report(lambda_embedding(v, w, cfg["p"], cfg["q"], grid))
    if cmd == "embed-gamma":
        v, gamma = build_measure(cfg["v"], "/v"), build_measure(cfg["gamma"], "/gamma")
        mu = build_measure(cfg["mu"], "/mu") if "mu" in cfg else PowerDensity(0.0)
        return _from_norm_report(gamma_embedding(v, gamma, mu, cfg["p"], cfg["q"], cfg["r"], grid))
    if cmd == "hardy":
        hp = build_hardy_problem(cfg)
        b = hardy_bounds(hp, grid)
        value = b.exact if b.exact is not None else None
        return {"value": value, "arg_sup": b.details.get("arg_sup"), "branch": b.regime,
                "applicability": bool(hp.exact_regime), "bounds": _bounds_dict(b), "details": {}}
    return _verify(job)


def _settings(job: Job) -> dict:
    o = job.oracle
    s = {"grid": {"points": job.grid.points, "span": job.grid.span, "refine_iters": job.grid.refine_iters}}
    if job.command == "verify":
        s["oracle"] = {"samples": o.samples, "pieces_max": o.pieces_max, "hill_climb_steps": o.hill_climb_steps,
                       "seed": o.seed, "extremal_points": o.extremal_points, "quad_points": o.quad_points}
    return s


# -- output -----------------------------------------------------------------------

def _plain(obj):
    """Numpy scalars to Python, non-finite floats to the strings used by the report schema."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with sorted keys and every float written with 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, float):
        return _fmt(obj)
    return json.dumps(obj)


def _fmt(x: float) -> str:
    text = format(x, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        yield prefix, ";".join(str(v) for v in obj)
    else:
        yield prefix, "" if obj is None else (_fmt(obj) if isinstance(obj, float) else str(obj))


def render(report: dict, output: str) -> str:
    if output == "json":
        return dumps(report) + "\n"
    rows = list(_flatten(report))
    if output == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["field", "value"])
        writer.writerows(rows)
        return buf.getvalue()
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def run(cfg: dict, output=None, seed=None, grid_points=None, grid_span=None, samples=None,
        stdout=None, stderr=None) -> int:
    """Run one job; returns the exit status and writes the report to ``stdout``."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        job = make_job(cfg, output, seed, grid_points, grid_span, samples)
        body = execute(job)
    except ConfigError as exc:
        print(f"config error at {exc}", file=stderr)
        return EXIT_CONFIG
    except (PreconditionError, DegenerateError, ParameterError) as exc:
        print(f"precondition failed: {exc}", file=stderr)
        return EXIT_PRECONDITION
    report = _plain({"schema": REPORT_SCHEMA_ID, "command": job.command, **body, "settings": _settings(job)})
    validate_report(report)
    stdout.write(render(report, job.output))
    if job.command == "verify" and report["verdict"]["status"] == "FAIL":
        return EXIT_FAIL
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conenorm", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command field")
    ap.add_argument("--config", required=True, help="job file, or - for stdin")
    ap.add_argument("--output", choices=("json", "csv", "table"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--grid-points", type=int)
    ap.add_argument("--grid-span", type=float)
    ap.add_argument("--samples", type=int)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else open(args.config, encoding="utf-8").read()
        cfg = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error at /: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command and isinstance(cfg, dict):
        cfg["command"] = args.command
    try:
        return run(cfg, args.output, args.seed, args.grid_points, args.grid_span, args.samples)
    except ValueError as exc:
        print(f"config error at /: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
