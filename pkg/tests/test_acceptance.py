"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured worst
value and the tolerance, then asserts.
"""
import filecmp
import json
import time

import numpy as np
import pytest

from btdet.cli import main as cli_main
from btdet.odeprop import HalfLine, Interval, PotentialSpec
from btdet.oracle import (MatrixSSF, accumulative_identities, discretize, krein_residual, matrix_ssf,
                          resolvent_trace_diff)
from btdet.pdet import log_derivative, pdet_ratio
from btdet.spectra import (Contour, completeness_indicator, dissipative_decomposition, functional_trace,
                           shift_grid, spectral_shift, trace_formula_residual)
from btdet.suite import (determinant_properties, halfline_closed_form, herglotz_suite, jost_consistency,
                         triplet_independence, zero_pole_accounting)
from btdet.triplets import ExtensionPair, characteristic_function
from btdet.weyl import FreeHalfLineWeyl, IntervalWeyl

BUDGET = 60.0


@pytest.fixture
def report(capsys):
    t0 = time.perf_counter()

    def emit(k, name, ok, worst, tol):
        dt = time.perf_counter() - t0
        ok = bool(ok) and dt <= BUDGET
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {name}: worst {worst:.3e} "
                  f"(tol {tol:.1e}, {dt:.1f}s)")
        assert ok, f"criterion {k} failed: worst {worst:.3e} tol {tol:.1e} time {dt:.1f}s"
    return emit


def test_c01_free_halfline_closed_form(report):
    r = halfline_closed_form(h1=1.0, h2=2.0, points=100, tol=1e-10)
    report(1, "free half-line determinant vs closed form", r.passed, r.worst, 1e-10)


def test_c02_jost_weyl(report):
    r = jost_consistency(v=0.5, points=20, tol_free=1e-10, tol_well=1e-8)
    ok = r.details["free"] <= 1e-10 and r.details["square_well"] <= 1e-8
    report(2, "half-line Weyl function (free 1e-10, square well 1e-8)", ok, r.worst, 1e-8)


def test_c03_nevanlinna(report):
    r = herglotz_suite(points=50, tol=1e-8)
    report(3, "Nevanlinna property of all Weyl maps", r.passed, r.worst, 1e-8)


def test_c04_determinant_identities(report):
    r = determinant_properties(instances=50, tol=1e-9)
    report(4, "chain rule, inversion, conjugation, quotient", r.passed, r.worst, 1e-9)


def test_c05_zero_pole_accounting(report):
    r = zero_pole_accounting(tol=1e-8)
    d = r.details
    ok = r.passed and d["winding_at_0"] == 1 and d["winding_at_1"] == 0 and d["multiplicities"] == (1, 1)
    report(5, f"windings ({d['winding_at_0']}, {d['winding_at_1']}), Robin eigenvalue", ok, r.worst, 1e-8)


def test_c06_triplet_independence(report):
    r = triplet_independence(transforms=10, tol=1e-9)
    report(6, "determinant quotient under J-unitary transforms", r.passed, r.worst, 1e-9)


def test_c07_trace_formula_and_oracle(report):
    q = PotentialSpec.zero(1, HalfLine(1.0))
    pair = ExtensionPair(-1.0, 1.0, FreeHalfLineWeyl())
    zs = [2j, 1 + 1j, -2 + 0.5j, 3 + 2j, -0.5 + 3j]
    t = shift_grid(-10, 1e3, 4000, focus=(-1.0, 0.0), tail_start=50)
    xi = spectral_shift(pair, t)
    quad = trace_formula_residual(pair, xi, zs).max_residual
    orc = 0.0
    for z in zs:
        d = resolvent_trace_diff(discretize(q, -1.0, 2000, L=30, z_ref=z), discretize(q, 1.0, 2000, L=30, z_ref=z), z)
        ref = -log_derivative(pair, z)
        orc = max(orc, abs(d - ref) / abs(ref))
    worst = max(quad, orc)
    report(7, f"trace formula {quad:.1e} and oracle {orc:.1e}", worst <= 1e-3, worst, 1e-3)


def test_c08_matrix_ssf(report):
    rng = np.random.default_rng(8)
    A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    H = (A + A.conj().T) / 2
    P = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
    V = P @ np.diag([1.5, -0.7]) @ P.conj().T
    s: MatrixSSF = matrix_ssf(H, V)
    trace_err = abs(s.integral - np.trace(V).real) / np.abs(np.linalg.eigvalsh(V)).sum()
    krein = max(krein_residual(H, V, z) for z in (1j, 3j, 1 + 2j))
    ok = trace_err <= 1e-12 and krein <= 1e-6
    report(8, f"matrix shift integral {trace_err:.1e}, Krein residual {krein:.1e}", ok, krein, 1e-6)


def test_c09_accumulative(report):
    r1 = accumulative_identities(np.diag([-1j, -2j]), np.diag([0.1, 0.0]))
    r2 = accumulative_identities(np.diag([0.0, 1.0]), np.diag([-0.1j, -0.05j]))
    a = max(r1["a"]["error"], r2["a"]["error"])
    b = max(r1["b"]["error"], r2["b"]["error"])
    sign = r2["sign"]["max_im_omega"]
    ok = all(r[k]["ok"] for r in (r1, r2) for k in ("a", "b")) and r2["sign"]["ok"]
    report(9, f"limit {a:.1e}, integral {b:.1e}, max Im omega {sign:.1e}", ok, b, 1e-3)


def test_c10_dissipative_interval(report):
    w = IntervalWeyl(PotentialSpec.zero(1, Interval(np.pi)))
    B = 1j * np.eye(2)
    model = dissipative_decomposition(B, w, (-5, 1700, -3, 3), np.linspace(-20, 50, 200),
                                      alpha_point=0.37)
    pair = ExtensionPair(B, -1j * np.eye(2), w)
    wdef = max(abs(np.linalg.det(characteristic_function(B, w(z))) - pdet_ratio(pair, z))
               / max(1.0, abs(pdet_ratio(pair, z))) for z in (1 + 1j, 3 + 0.2j, -2 + 2j))
    dalpha = abs(model.alpha - model.alpha_identity)
    ok = (not model.real_eigenvalues and model.modulus_defect <= 1e-6 and wdef <= 1e-9
          and dalpha <= 1e-4 and completeness_indicator(model))
    report(10, f"modulus {model.modulus_defect:.1e}, det W {wdef:.1e}, alpha {dalpha:.1e}", ok,
           max(model.modulus_defect, dalpha), 1e-4)


def test_c11_functional_trace_oracle(report):
    q = PotentialSpec.from_callable(lambda x: np.array([[np.sin(x)]]), 1, Interval(np.pi))
    worst = 0.0
    for Bp, B in ((np.diag([1.0, 0.5]), np.zeros((2, 2))), (np.diag([1j, 0.3j]), np.zeros((2, 2)))):
        Hp, H = discretize(q, Bp, 32).H, discretize(q, B, 32).H
        ev = np.concatenate([np.linalg.eigvals(Hp), np.linalg.eigvals(H)])
        lo, hi = ev.real.min(), ev.real.max()
        c = Contour.circle((lo + hi) / 2, (hi - lo) / 2 + 2.0)
        z0 = lo - 5.0 + 1.0j
        val = functional_trace(lambda z: resolvent_trace_diff(Hp, H, z), lambda z: 1 / (z - z0), c,
                               spectra="interior")
        ref = resolvent_trace_diff(Hp, H, z0)
        worst = max(worst, abs(val - ref) / abs(ref))
    report(11, "contour functional trace on oracle matrices", worst <= 1e-6, worst, 1e-6)


def test_c12_cli_determinism(report, tmp_path):
    cfg = {
        "problem": {"kind": "free_halfline"},
        "extensions": {"h1": 1.0, "h2": 2.0, "hm": -1.0, "ha": [2.0, -0.5]},
        "tasks": [
            {"id": "path", "type": "pdet_path", "pair": ["h2", "h1"],
             "path": {"kind": "line", "start": [-5, 1], "end": [5, 1], "points": 50}},
            {"id": "eig", "type": "locate", "extension": "hm", "region": [-2, -0.1, -0.5, 0.5]},
            {"id": "xi", "type": "ssf", "pair": ["hm", "h1"],
             "grid": {"lo": -10, "hi": 100, "points": 1500, "focus": [-1, 0], "tail_start": 50}},
            {"id": "om", "type": "complex_ssf", "pair": ["ha", "h1"],
             "grid": {"lo": -10, "hi": 100, "points": 1500, "focus": [0], "tail_start": 50}},
            {"id": "ft", "type": "functional_trace", "pair": ["h2", "h1"], "zeta0": [1, 1],
             "contour": {"center": [1, 1], "radius": 0.5}},
            {"id": "orc", "type": "oracle_compare", "pair": ["hm", "h1"], "z_samples": [[0, 2]],
             "cells": 600, "truncation": 30, "tol": 1e-2},
        ],
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    codes = [cli_main(["run", str(p), "--out", str(tmp_path / d), "--seed", "7"]) for d in ("a", "b")]
    names = sorted(f.name for f in (tmp_path / "a").iterdir())
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    ok = codes == [0, 0] and not mismatch and not errors and len(names) == len(cfg["tasks"]) + 1
    report(12, f"{len(names)} output files byte-identical", ok, float(len(mismatch) + len(errors)), 0.5)
