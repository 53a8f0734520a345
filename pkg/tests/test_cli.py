import json

import numpy as np
import pytest

from btdet.cli import EXIT_CHECK, EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, main

FULL = {
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
    ],
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", _write(tmp_path, FULL), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and len(summary["tasks"]) == len(FULL["tasks"])
    header, first = (out / "eig.csv").read_text().splitlines()[:2]
    assert header.startswith("re")
    assert float(first.split(",")[0]) == pytest.approx(-1.0, abs=1e-8)


def test_csv_round_trips_exactly(tmp_path):
    out = tmp_path / "out"
    main(["run", _write(tmp_path, FULL), "--out", str(out)])
    data = np.loadtxt(out / "path.csv", delimiter=",", skiprows=1)
    text = (out / "path.csv").read_text().splitlines()[1].split(",")
    assert [format(v, ".17g") for v in data[0]] == text


def test_run_is_deterministic(tmp_path, monkeypatch):
    cfg = _write(tmp_path, FULL)
    main(["run", cfg, "--out", str(tmp_path / "a")])
    monkeypatch.setenv("BTDET_JOBS", "3")
    main(["run", cfg, "--out", str(tmp_path / "b")])
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_check_ok_and_errors(tmp_path, capsys):
    assert main(["check", _write(tmp_path, FULL)]) == EXIT_OK
    bad = {"problem": {"kind": "interval"}, "tasks": [{"id": "x", "type": "sssf"}]}
    assert main(["check", _write(tmp_path, bad, "bad.json")]) == EXIT_CONFIG
    assert "/tasks/0/type" in capsys.readouterr().err


@pytest.mark.parametrize("cfg, pointer", [
    ({"problem": {"kind": "interval"}, "tasks": []}, "/problem"),
    ({"problem": {"kind": "free_halfline"}, "extensions": {"a": [[1, 0], [0, 1]]}, "tasks": []}, "/extensions/a"),
    ({"problem": {"kind": "free_halfline"}, "extensions": {"a": 1.0},
      "tasks": [{"id": "e", "type": "locate", "extension": "b", "region": [0, 1, 0, 1]}]}, "/tasks/0/extension"),
    ({"problem": {"kind": "free_halfline"}, "tasks": [{"id": "e"}]}, "/tasks/0"),
])
def test_config_errors_point_at_the_field(tmp_path, capsys, cfg, pointer):
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert pointer in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["check", str(p)]) == EXIT_CONFIG


def test_compute_error_exit(tmp_path, capsys):
    cfg = {"problem": {"kind": "free_halfline"}, "extensions": {"a": 1.0, "b": 2.0},
           "tasks": [{"id": "p", "type": "pdet_path", "pair": ["a", "b"],
                      "path": {"kind": "line", "start": [-2, 0], "end": [2, 0], "points": 41}}]}
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_COMPUTE
    assert "task p" in capsys.readouterr().err


def test_failed_check_exit(tmp_path):
    cfg = {"problem": {"kind": "free_halfline"}, "extensions": {"a": 1.0, "b": -1.0},
           "tasks": [{"id": "o", "type": "oracle_compare", "pair": ["b", "a"], "z_samples": [[0, 2]],
                      "cells": 200, "truncation": 20, "tol": 1e-12}]}
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_CHECK
    assert not json.loads((out / "summary.json").read_text())["passed"]


def test_empty_task_list(tmp_path):
    cfg = {"problem": {"kind": "free_halfline"}, "tasks": []}
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_dissipative_interval(tmp_path):
    cfg = {"problem": {"kind": "interval", "length": np.pi},
           "extensions": {"Bi": [[[0, 1], 0], [0, [0, 1]]]},
           "tasks": [{"id": "dis", "type": "dissipative", "extension": "Bi", "region": [-5, 1700, -3, 3]}]}
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    checks = json.loads((out / "summary.json").read_text())["tasks"][0]["checks"]
    assert all(checks.values()) and len(checks) == 5


def test_suite_command(tmp_path):
    assert main(["suite", "closed_form", "zero_pole", "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "suite.json").read_text())["passed"]
    assert main(["suite", "nope"]) == EXIT_CONFIG
