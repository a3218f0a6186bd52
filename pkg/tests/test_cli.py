import json
import os

import numpy as np
import pytest

from ccpde.cli import run


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_solve_writes_report_and_manifest(tmp_path):
    out = tmp_path / "solve"
    status = run([
        "solve", "--frame", "euclidean2", "--res", "33", "--box", "0,1;0,1",
        "--p", "4", "--f", "const:1", "--g", "const:0",
        "--out", str(out), "--export-field",
    ])
    assert status == 0
    report = _read_json(out / "report.json")
    manifest = _read_json(out / "manifest.json")
    assert report["E_p"] > 0.0
    assert report["converged"] is True
    assert abs(report["ep_identity_gap_weak"]) <= 1e-6
    assert manifest["subcommand"] == "solve"
    assert manifest["p"] == 4.0
    data = np.loadtxt(out / "u.csv", delimiter=",", skiprows=1)
    assert data.shape == (33 * 33, 3)


def test_expr_data_specifier(tmp_path):
    status = run([
        "solve", "--frame", "euclidean2", "--res", "17", "--box", "0,1;0,1",
        "--p", "4", "--f", "const:0", "--g", "expr:x1 - x2",
        "--out", str(tmp_path / "affine"),
    ])
    assert status == 0
    report = _read_json(tmp_path / "affine" / "report.json")
    # affine data is already optimal: the solver accepts it without iterating
    assert report["converged"] is True
    assert report["final_grad_norm"] <= 1e-8


def test_sweep_reports_monotonicity(tmp_path):
    out = tmp_path / "sweep"
    status = run([
        "sweep", "--frame", "euclidean2", "--res", "33", "--box", "0,1;0,1",
        "--p-list", "4,8,16", "--f", "const:1", "--out", str(out),
    ])
    assert status == 0
    report = _read_json(out / "report.json")
    assert report["monotonicity"]["passed"] is True
    assert len(report["N_p"]) == 3


def test_distance_and_file_reuse(tmp_path):
    out = tmp_path / "dist"
    status = run([
        "distance", "--frame", "euclidean2", "--res", "33", "--box", "0,1;0,1",
        "--source", "boundary", "--out", str(out), "--export-field",
    ])
    assert status == 0
    # feed the exported field back through the probe subcommand
    status = run([
        "probe", "--frame", "euclidean2", "--res", "33", "--box", "0,1;0,1",
        "--u", f"file:{out / 'd.csv'}", "--point", "0.25,0.5",
        "--equation", "eikonal", "--side", "sub", "--budget", "64",
        "--out", str(tmp_path / "probe"),
    ])
    assert status == 0


def test_differential_subcommand(tmp_path):
    status = run([
        "differential", "--frame", "heisenberg1", "--res", "17",
        "--box", "0,2;-1,1;-1,1", "--u", "expr:x1", "--point", "1,0,0",
        "--radii", "0.4,0.2", "--out", str(tmp_path / "diff"),
    ])
    assert status == 0
    assert (tmp_path / "diff" / "profile.csv").exists()


def test_usage_errors_exit_2(tmp_path):
    assert run(["solve", "--frame", "nosuch", "--res", "17", "--p", "4",
                "--out", str(tmp_path / "x1")]) == 2
    assert run(["solve", "--frame", "euclidean2", "--res", "5", "--p", "4",
                "--out", str(tmp_path / "x2")]) == 2
    assert run(["solve", "--frame", "euclidean2", "--res", "17", "--p", "4",
                "--f", "file:/does/not/exist.csv", "--out", str(tmp_path / "x3")]) == 2
    assert run(["nosuchcommand"]) == 2


def test_deterministic_reports_bitwise_identical(tmp_path):
    argv = ["sweep", "--frame", "euclidean2", "--res", "17", "--box", "0,1;0,1",
            "--p-list", "4,8", "--f", "const:1", "--deterministic"]
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run(argv + ["--out", str(out)]) == 0
        outs.append((out / "report.json").read_bytes())
    assert outs[0] == outs[1]


def test_output_dir_env_override(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("CCPDE_OUTPUT_DIR", str(target))
    status = run(["frames", "--frame", "heisenberg1"])
    assert status == 0
    assert (target / "report.json").exists()
    report = _read_json(target / "report.json")
    assert report["lic_rank"] == 2
    assert report["rank_by_depth"][-1] == 3


def test_verify_core_suite(tmp_path):
    out = tmp_path / "verify"
    status = run(["verify", "--suite", "core", "--out", str(out)])
    assert status == 0
    report = _read_json(out / "report.json")
    assert report["passed"] is True
    assert all(c["passed"] for c in report["checks"])
