"""
Command line front end.

::

    btdet run CONFIG.json [--out DIR] [--jobs K] [--seed S]
    btdet check CONFIG.json
    btdet suite [NAME ...] [--out DIR] [--seed S]

Exit codes: 0 success, 2 invalid configuration, 3 computation error,
4 failed property check.  Data go to files, logs to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .errors import BtdetError
from .odeprop import HalfLine, Interval, PotentialSpec, load_potential_csv
from .pdet import eval_path, log_derivative
from .spectra import (Contour, complex_shift, completeness_indicator, dissipative_decomposition,
                      functional_trace, locate_eigenvalues, shift_grid, spectral_shift,
                      trace_formula_residual)
from .triplets import BoundaryOperator, ExtensionPair, characteristic_function
from .weyl import FreeHalfLineWeyl, IntervalWeyl, JostHalfLineWeyl

log = logging.getLogger("btdet")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_CHECK = 0, 2, 3, 4

_num = {"oneOf": [{"type": "number"},
                  {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_matrix = {"oneOf": [_num, {"type": "array", "items": {"type": "array", "items": _num, "minItems": 1},
                            "minItems": 1}]}
_pair = {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}
_grid = {"type": "object", "required": ["lo", "hi"], "additionalProperties": False,
         "properties": {"lo": {"type": "number"}, "hi": {"type": "number"},
                        "points": {"type": "integer", "minimum": 2},
                        "focus": {"type": "array", "items": {"type": "number"}},
                        "tail_start": {"type": "number"}}}
_ladder = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2}
_zlist = {"type": "array", "items": _num, "minItems": 1}
_circle = {"type": "object", "required": ["center", "radius"], "additionalProperties": False,
           "properties": {"center": _num, "radius": {"type": "number", "exclusiveMinimum": 0},
                          "samples": {"type": "integer", "minimum": 8}}}
_path = {"type": "object", "required": ["kind"], "additionalProperties": False,
         "properties": {"kind": {"enum": ["line", "circle"]}, "start": _num, "end": _num,
                        "center": _num, "radius": {"type": "number"},
                        "points": {"type": "integer", "minimum": 2}}}


def _task(name, required, props):
    base = {"id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}, "type": {"const": name},
            "tol": {"type": "number", "exclusiveMinimum": 0}}
    return {"type": "object", "required": ["id", "type"] + required, "additionalProperties": False,
            "properties": base | props}


SCHEMA = {
    "type": "object",
    "required": ["problem"],
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["free_halfline", "jost_halfline", "interval"]},
                "channels": {"type": "integer", "minimum": 1},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "potential": {
                    "type": "object", "required": ["type"], "additionalProperties": False,
                    "properties": {"type": {"enum": ["zero", "constant", "square_well", "csv"]},
                                   "value": _matrix, "v": {"type": "number"},
                                   "width": {"type": "number", "exclusiveMinimum": 0},
                                   "path": {"type": "string"}}},
            }},
        "extensions": {"type": "object", "additionalProperties": _matrix},
        "tasks": {"type": "array", "items": {"oneOf": [
            _task("pdet_path", ["pair", "path"], {"pair": _pair, "path": _path,
                                                  "seed": _num}),
            _task("locate", ["extension", "region"], {
                "extension": {"type": "string"},
                "region": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}}),
            _task("ssf", ["pair", "grid"], {"pair": _pair, "grid": _grid, "eps_ladder": _ladder}),
            _task("complex_ssf", ["pair", "grid"], {"pair": _pair, "grid": _grid, "eps_ladder": _ladder}),
            _task("trace_check", ["pair", "grid", "z_samples"], {
                "pair": _pair, "grid": _grid, "eps_ladder": _ladder, "z_samples": _zlist}),
            _task("dissipative", ["extension", "region"], {
                "extension": {"type": "string"},
                "region": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
                "real_grid": _grid, "alpha_point": {"type": "number"}, "eps_ladder": _ladder,
                "z_check": _zlist}),
            _task("functional_trace", ["pair", "zeta0", "contour"], {
                "pair": _pair, "zeta0": _num, "contour": _circle,
                "spectra": {"enum": ["exterior", "interior"]}}),
            _task("oracle_compare", ["pair", "z_samples"], {
                "pair": _pair, "z_samples": _zlist, "cells": {"type": "integer", "minimum": 16},
                "truncation": {"type": "number", "exclusiveMinimum": 0}}),
        ]}},
        "numeric": {"type": "object", "additionalProperties": False,
                    "properties": {"eps_ladder": _ladder, "tol": {"type": "number", "exclusiveMinimum": 0}}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"}}},
    },
}


class ConfigError(Exception):
    """Invalid configuration; ``pointer`` locates the offending field."""

    def __init__(self, message, pointer="/"):
        super().__init__(message)
        self.pointer = pointer


def _c(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)


def _cmat(x):
    if not isinstance(x, list) or (len(x) == 2 and all(isinstance(v, (int, float)) for v in x)):
        return np.array([[_c(x)]])
    return np.array([[_c(v) for v in row] for row in x])


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


def validate(cfg, base_dir=Path(".")):
    """Schema plus semantic validation; returns the resolved problem.

    Raises
    ------
    ConfigError
    """
    v = jsonschema.Draft202012Validator(SCHEMA)
    # per-task schemas first: the combined oneOf error is not informative
    tasks = cfg.get("tasks") if isinstance(cfg, dict) else None
    if isinstance(tasks, list):
        variants = {sub["properties"]["type"]["const"]: sub
                    for sub in SCHEMA["properties"]["tasks"]["items"]["oneOf"]}
        for j, t in enumerate(tasks):
            if isinstance(t, dict) and t.get("type") in variants:
                for e in jsonschema.Draft202012Validator(variants[t["type"]]).iter_errors(t):
                    raise ConfigError(e.message, _pointer(["tasks", j] + list(e.absolute_path)))
            elif isinstance(t, dict):
                raise ConfigError(f"unknown task type {t.get('type')!r}; expected one of {sorted(variants)}",
                                  f"/tasks/{j}/type")
    errs = sorted(v.iter_errors(cfg), key=lambda e: [str(p) for p in e.absolute_path])
    if errs:
        e = errs[0]
        raise ConfigError(e.message, _pointer(e.absolute_path))
    prob = cfg["problem"]
    kind = prob["kind"]
    n = int(prob.get("channels", 1))
    m = 2 * n if kind == "interval" else n
    ext = {}
    for name, val in cfg.get("extensions", {}).items():
        try:
            B = _cmat(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"extension {name!r}: {exc}", f"/extensions/{name}") from None
        if B.shape != (m, m):
            raise ConfigError(f"extension {name!r} is {B.shape[0]}x{B.shape[1]}, expected {m}x{m}",
                              f"/extensions/{name}")
        ext[name] = BoundaryOperator(B)
    ids = set()
    for j, t in enumerate(cfg.get("tasks", [])):
        if t["id"] in ids:
            raise ConfigError(f"duplicate task id {t['id']!r}", f"/tasks/{j}/id")
        ids.add(t["id"])
        refs = [(f"/tasks/{j}/pair/{i}", r) for i, r in enumerate(t.get("pair", []))]
        if "extension" in t:
            refs.append((f"/tasks/{j}/extension", t["extension"]))
        for ptr, r in refs:
            if r not in ext:
                raise ConfigError(f"task {t['id']!r} references undefined extension {r!r}", ptr)
    pot = prob.get("potential", {"type": "zero"})
    if kind == "free_halfline" and pot["type"] != "zero":
        raise ConfigError("free_halfline takes no potential", "/problem/potential")
    if kind == "interval" and "length" not in prob:
        raise ConfigError("interval problems need a length", "/problem")
    if pot["type"] == "csv":
        p = Path(pot["path"])
        pot = dict(pot, path=str(p if p.is_absolute() else base_dir / p))
        if not Path(pot["path"]).exists():
            raise ConfigError(f"potential file {pot['path']} not found", "/problem/potential/path")
    return {"kind": kind, "n": n, "m": m, "length": prob.get("length"), "potential": pot,
            "extensions": ext}


def build_potential(problem) -> PotentialSpec:
    kind, n, pot = problem["kind"], problem["n"], problem["potential"]
    if kind == "interval":
        support = Interval(float(problem["length"]))
    else:
        width = pot.get("width", 1.0) if pot["type"] == "square_well" else 1.0
        support = HalfLine(float(problem.get("length") or width))
    t = pot["type"]
    if t == "zero":
        return PotentialSpec.zero(n, support)
    if t == "constant":
        return PotentialSpec.constant_potential(_cmat(pot["value"]), support)
    if t == "square_well":
        if kind == "interval":
            raise ConfigError("square_well is a half-line potential", "/problem/potential")
        return PotentialSpec.square_well(float(pot["v"]), float(pot.get("width", 1.0)), n)
    return load_potential_csv(pot["path"], support, n)


def build_weyl(problem, q):
    if problem["kind"] == "free_halfline":
        return FreeHalfLineWeyl(problem["n"])
    if problem["kind"] == "jost_halfline":
        return JostHalfLineWeyl(q)
    return IntervalWeyl(q)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(np.real(obj)), float(np.imag(obj))]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------

def _grid_from(spec):
    return shift_grid(spec["lo"], spec["hi"], spec.get("points", 2000), focus=spec.get("focus", ()),
                      tail_start=spec.get("tail_start"))


def _path_from(spec):
    n = spec.get("points", 200)
    if spec["kind"] == "line":
        a, b = _c(spec["start"]), _c(spec["end"])
        return a + (b - a) * np.linspace(0.0, 1.0, n)
    th = 2 * np.pi * np.arange(n) / n
    return _c(spec["center"]) + float(spec["radius"]) * np.exp(1j * th)


class Runner:
    def __init__(self, problem, q, weyl, numeric, out, jobs=1, seed=0):
        self.problem, self.q, self.weyl = problem, q, weyl
        self.numeric = numeric
        self.out = out
        self.jobs = jobs
        self.seed = seed

    def pair(self, t):
        ext = self.problem["extensions"]
        return ExtensionPair(ext[t["pair"][0]], ext[t["pair"][1]], self.weyl)

    def ladder(self, t):
        from .spectra import DEFAULT_LADDER
        return tuple(t.get("eps_ladder", self.numeric.get("eps_ladder", DEFAULT_LADDER)))

    def run_task(self, t):
        return getattr(self, "task_" + t["type"])(t)

    def task_pdet_path(self, t):
        path = _path_from(t["path"])
        dp = eval_path(self.pair(t), path, seed=_c(t.get("seed", 0)), jobs=self.jobs,
                       closed=t["path"]["kind"] == "circle")
        fn = self.out / f"{t['id']}.csv"
        z, v, lg = dp.log.path, dp.values, dp.log.values
        write_csv(fn, ["re_z", "im_z", "re_delta", "im_delta", "re_log", "im_log"],
                  [z.real, z.imag, v.real, v.imag, lg.real, lg.imag])
        return {"outputs": [fn.name], "winding": dp.winding, "refined_points": dp.refined_points}, {}

    def task_locate(self, t):
        B = self.problem["extensions"][t["extension"]]
        ev = locate_eigenvalues(B, self.weyl, t["region"], tol=t.get("tol", 1e-8))
        fn = self.out / f"{t['id']}.csv"
        write_csv(fn, ["re_z", "im_z", "algebraic", "geometric"],
                  [[e.z.real for e in ev], [e.z.imag for e in ev],
                   [e.algebraic for e in ev], [e.geometric for e in ev]])
        return ({"outputs": [fn.name], "count": len(ev), "unresolved": list(ev.unresolved)},
                {"all_cells_resolved": not ev.unresolved})

    def _shift(self, t, fn_shift):
        s = fn_shift(self.pair(t), _grid_from(t["grid"]), self.ladder(t), jobs=self.jobs)
        return s

    def task_ssf(self, t):
        s = self._shift(t, spectral_shift)
        fn = self.out / f"{t['id']}.csv"
        write_csv(fn, ["t", "xi", "residual", "flagged"], [s.t_grid, s.values, s.residual, s.flagged])
        return {"outputs": [fn.name], "branch_offset": s.branch_offset, "flagged": int(s.flagged.sum()),
                "eps_ladder": list(s.eps_ladder)}, {}

    def task_complex_ssf(self, t):
        s = self._shift(t, complex_shift)
        fn = self.out / f"{t['id']}.csv"
        write_csv(fn, ["t", "re_omega", "im_omega", "residual", "flagged"],
                  [s.t_grid, s.values.real, s.values.imag, s.residual, s.flagged])
        checks = {}
        if "sign_violations" in s.notes:
            checks["im_omega_sign"] = s.notes["sign_violations"] == 0
        return {"outputs": [fn.name], "branch_offset": s.branch_offset, "flagged": int(s.flagged.sum()),
                "notes": s.notes}, checks

    def task_trace_check(self, t):
        pair = self.pair(t)
        fn_shift = spectral_shift if pair.selfadjoint else complex_shift
        s = self._shift(t, fn_shift)
        zs = [_c(z) for z in t["z_samples"]]
        r = trace_formula_residual(pair, s, zs)
        tol = t.get("tol", self.numeric.get("tol", 1e-3))
        rep = {"max_residual": r.max_residual, "residuals": r.residuals, "window": r.window,
               "z_samples": zs, "quadrature": r.quadrature, "reference": r.reference, "tol": tol}
        fn = self.out / f"{t['id']}.json"
        write_json(fn, rep)
        return {"outputs": [fn.name], "max_residual": r.max_residual}, {"trace_formula": r.max_residual <= tol}

    def task_dissipative(self, t):
        B = self.problem["extensions"][t["extension"]]
        rg = t.get("real_grid", {"lo": -20.0, "hi": 50.0, "points": 200})
        real = np.linspace(rg["lo"], rg["hi"], rg.get("points", 200))
        model = dissipative_decomposition(B, self.weyl, t["region"], real, self.ladder(t),
                                          alpha_point=t.get("alpha_point", 0.37))
        zc = [_c(z) for z in t.get("z_check", [[1.0, 1.0], [3.0, 0.2], [-2.0, 2.0]])]
        pair = ExtensionPair(B, B.adjoint(), self.weyl)
        from .pdet import pdet_ratio
        wdef = max(abs(np.linalg.det(characteristic_function(B, self.weyl(z))) - pdet_ratio(pair, z))
                   / max(1.0, abs(pdet_ratio(pair, z))) for z in zc)
        tol = t.get("tol", 1e-4)
        rep = {"eigs_plus": model.eigs_plus, "eigs_minus": model.eigs_minus,
               "real_eigenvalues": model.real_eigenvalues, "alpha": model.alpha,
               "alpha_identity": model.alpha_identity, "c": model.c, "fit_residual": model.fit_residual,
               "modulus_defect": model.modulus_defect, "unresolved": model.unresolved,
               "complete": completeness_indicator(model, tol), "char_fn_defect": wdef}
        fn = self.out / f"{t['id']}.json"
        write_json(fn, rep)
        checks = {"no_real_eigenvalues": not model.real_eigenvalues,
                  "modulus_one": model.modulus_defect <= 1e-6,
                  "char_fn_det": wdef <= 1e-9,
                  "alpha_agreement": model.alpha_identity is not None
                  and abs(model.alpha - model.alpha_identity) <= tol,
                  "complete": rep["complete"]}
        return {"outputs": [fn.name], "alpha": model.alpha}, checks

    def task_functional_trace(self, t):
        pair = self.pair(t)
        z0 = _c(t["zeta0"])
        c = Contour.circle(_c(t["contour"]["center"]), t["contour"]["radius"],
                           samples=t["contour"].get("samples", 64))
        spectra = t.get("spectra", "exterior")
        val = functional_trace(pair, lambda z: 1.0 / (z - z0), c, spectra=spectra)
        direct = -log_derivative(pair, z0)
        err = abs(val - direct) / max(abs(direct), 1e-300)
        tol = t.get("tol", 1e-6)
        fn = self.out / f"{t['id']}.json"
        write_json(fn, {"value": val, "direct": direct, "relative_error": err, "spectra": spectra})
        return {"outputs": [fn.name], "relative_error": err}, {"functional_trace": err <= tol}

    def task_oracle_compare(self, t):
        from .oracle import oracle_trace_diff
        ext = self.problem["extensions"]
        Bp, B = ext[t["pair"][0]].B, ext[t["pair"][1]].B
        pair = self.pair(t)
        N = t.get("cells", 2000)
        L = t.get("truncation")
        rows = []
        for z in (_c(z) for z in t["z_samples"]):
            orc = oracle_trace_diff(self.q, Bp, B, z, N=N, L=L, extrapolate=False)
            ref = -log_derivative(pair, z)
            rows.append({"z": z, "oracle": orc, "weyl": ref, "relative_error": abs(orc - ref) / abs(ref)})
        worst = max(r["relative_error"] for r in rows)
        tol = t.get("tol", 1e-3)
        fn = self.out / f"{t['id']}.json"
        write_json(fn, {"cells": N, "rows": rows, "worst": worst})
        return {"outputs": [fn.name], "worst": worst}, {"oracle_agreement": worst <= tol}


def _jobs(arg):
    env = os.environ.get("BTDET_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer BTDET_JOBS=%r", env)
    return max(1, int(arg or 1))


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


def cmd_check(args):
    try:
        cfg = _load(args.config)
        validate(cfg, Path(args.config).parent)
    except ConfigError as exc:
        print(f"config error at {exc.pointer}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("config ok", file=sys.stderr)
    return EXIT_OK


def cmd_run(args):
    try:
        cfg = _load(args.config)
        problem = validate(cfg, Path(args.config).parent)
        q = build_potential(problem)
        weyl = build_weyl(problem, q)
    except ConfigError as exc:
        print(f"config error at {exc.pointer}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.get("output", {}).get("dir", "btdet_out"))
    out.mkdir(parents=True, exist_ok=True)
    runner = Runner(problem, q, weyl, cfg.get("numeric", {}), out, _jobs(args.jobs), args.seed)
    summary = {"config": Path(args.config).name, "seed": args.seed, "tasks": []}
    status = EXIT_OK
    for t in cfg.get("tasks", []):
        log.info("task %s (%s)", t["id"], t["type"])
        entry = {"id": t["id"], "type": t["type"]}
        try:
            info, checks = runner.run_task(t)
            entry.update(info)
            entry["checks"] = checks
            entry["passed"] = all(checks.values())
            if not entry["passed"] and status == EXIT_OK:
                status = EXIT_CHECK
        except (BtdetError, np.linalg.LinAlgError, ValueError) as exc:
            print(f"task {t['id']}: {type(exc).__name__}: {exc}", file=sys.stderr)
            entry["error"] = f"{type(exc).__name__}: {exc}"
            entry["passed"] = False
            status = EXIT_COMPUTE
        summary["tasks"].append(entry)
    summary["passed"] = status == EXIT_OK
    write_json(out / "summary.json", summary)
    return status


def cmd_suite(args):
    from .suite import SUITES, run_suite
    names = args.names or sorted(SUITES)
    results = []
    for name in names:
        try:
            r = run_suite(name, seed=args.seed)
        except KeyError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_CONFIG
        print(r.line(), file=sys.stderr)
        results.append(r.as_dict())
    ok = all(r["passed"] for r in results)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "suite.json", {"seed": args.seed, "passed": ok, "suites": results})
    return EXIT_OK if ok else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="btdet", description="Perturbation determinants of boundary-condition extensions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the tasks of a config file")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("check", help="validate a config file")
    c.add_argument("config")
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("suite", help="run the built-in property suites")
    s.add_argument("names", nargs="*")
    s.add_argument("--out")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
