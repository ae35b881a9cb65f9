#!/usr/bin/env python3
"""
Test script for the command line: build, verify, curve, qnorm and the report helpers
"""

import json

import numpy as np
import pandas as pd
import pytest

from app import main
from config import CHECK_NAMES, Config, load_run_config
from src.cli.commands import build_bundle, cmd_verify, run_check
from src.cli.reports import check_seeds, combine, to_jsonable
from src.linalg.core import column
from src.operators.serialization import read_json


@pytest.fixture(autouse=True)
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("ORBIT_GEODESICS_CONFIG", raising=False)
    monkeypatch.setattr(Config, "CONFIG_PATH", None)
    return tmp_path


def test_build_writes_five_documents(workspace):
    out = workspace / "build"
    assert main(["build", "--n", "8", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["b.json", "d0.json", "z2.json", "z_dg.json", "z_o.json"]
    z2 = read_json(out / "z2.json")
    assert z2["dim"] == 8 and z2["kind"] == "anti-hermitian" and len(z2["entries"]) == 64
    assert z2["metadata"]["warnings"] == []
    assert z2["metadata"]["tail_bound"] > 0


def test_build_records_construction_warning(workspace):
    out = workspace / "warned"
    assert main(["build", "--n", "8", "--delta", "0.3", "--out", str(out)]) == 0
    assert read_json(out / "z2.json")["metadata"]["warnings"]


def test_usage_errors(workspace):
    assert main(["build", "--n", "1", "--out", str(workspace)]) == 2
    assert main(["verify", "--suite", "certify,nonsense", "--out", str(workspace)]) == 2


def test_verify_certify(workspace, capsys):
    out = workspace / "verify"
    assert main(["verify", "--n", "16", "--suite", "certify", "--out", str(out), "--json"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["passed"]
    assert printed["checks"][0]["verdict"] == "certified-minimal"
    assert "PCG64" in printed["config"]["rng"]
    assert read_json(out / "report.json") == printed


def test_verify_is_deterministic(workspace):
    out = workspace / "det"
    args = ["verify", "--n", "8", "--suite", "bch,certify", "--seed", "5", "--out", str(out)]
    main(args)
    first = (out / "report.json").read_bytes()
    main(args)
    assert (out / "report.json").read_bytes() == first


def test_parallel_workers_match_serial(workspace):
    serial = load_run_config(overrides={"n": 32, "suite": "bch,certify,membership", "output_dir": str(workspace / "s")})
    parallel = serial.model_copy(update={"workers": 3, "output_dir": str(workspace / "p")})
    report_serial, status_serial = cmd_verify(serial)
    report_parallel, status_parallel = cmd_verify(parallel)
    assert status_serial == status_parallel == 0
    assert report_serial["checks"] == report_parallel["checks"]


def test_thm59_reports_control(workspace):
    config = load_run_config(overrides={"n": 32, "output_dir": str(workspace)})
    report = run_check("thm59", config, build_bundle(config), check_seeds(config.seed)["thm59"])
    assert report["verdict"] == "pass"
    control = report["params"]["parts"]["control"]
    assert not control["params"]["obstruction_present"]


def test_lemma58_negative_control_is_expected(workspace):
    config = load_run_config(overrides={"n": 16, "output_dir": str(workspace)})
    report = run_check("lemma58", config, build_bundle(config), 0)
    assert report["verdict"] == "pass"
    assert report["params"]["parts"]["perturbed"]["verdict"] == "fail"


def test_curve_samples(workspace):
    out = workspace / "curve"
    assert main(["curve", "--n", "8", "--samples", "2", "--out", str(out)]) == 0
    lines = (out / "curve.csv").read_text().strip().splitlines()
    assert len(lines) == 3
    frame = pd.read_csv(out / "curve.csv")
    assert list(frame.columns) == ["t", "cumulative_length", "speed", "t_norm_z", "sphere_speed", "window_ok"]
    assert frame["cumulative_length"].iloc[-1] == pytest.approx(frame["t_norm_z"].iloc[-1], rel=1e-6)
    assert frame["window_ok"].all()


def test_curve_flags_window(workspace):
    out = workspace / "long"
    assert main(["curve", "--n", "8", "--samples", "3", "--t-max", "5.0", "--out", str(out)]) == 0
    frame = pd.read_csv(out / "curve.csv")
    assert not frame["window_ok"].iloc[-1]


def test_qnorm_command(workspace, capsys):
    out = workspace / "q"
    assert main(["qnorm", "--n", "8", "--operator", "z_o", "--out", str(out), "--json"]) == 0
    result = json.loads(capsys.readouterr().out)
    z_o = build_bundle(load_run_config(overrides={"n": 8})).z_o
    assert result["value"] == pytest.approx(float(np.linalg.norm(column(z_o, 1))), abs=1e-6)
    assert set(result) >= {"value", "gap", "iterations", "argmin"}


def test_qnorm_bad_operator_file_is_usage_error(workspace, capsys):
    out = workspace / "q"
    assert main(["qnorm", "--operator", str(workspace / "missing.json"), "--out", str(out)]) == 2
    broken = workspace / "broken.json"
    broken.write_text("{\"dim\": 2, \"entries\": [")
    assert main(["qnorm", "--operator", str(broken), "--out", str(out)]) == 2
    wrong = workspace / "wrong.json"
    wrong.write_text("[1, 2, 3]")
    assert main(["qnorm", "--operator", str(wrong), "--out", str(out)]) == 2
    assert "Configuration error" in capsys.readouterr().err


def test_probe_command(workspace, capsys):
    out = workspace / "probe"
    config_file = workspace / "probe.cfg"
    config_file.write_text("PROBE.DIM=6\nPROBE.TRIALS=1\nPROBE.RADII=0.01,0.02\n")
    assert main(["probe", "--config", str(config_file), "--out", str(out), "--json"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["check"] == "hopf-rinow-sweep"
    assert len(printed["params"]["radii"]) == 2
    assert read_json(out / "probe.json") == printed


def test_seeds_do_not_depend_on_selection():
    everything = check_seeds(11)
    assert set(everything) == set(CHECK_NAMES)
    assert check_seeds(11, ["bch"])["bch"] == everything["bch"]
    assert len(set(everything.values())) == len(CHECK_NAMES)


def test_combine_with_negative_control():
    good = {"verdict": "pass"}
    bad = {"verdict": "fail"}
    assert combine("x", {"a": good, "b": bad}, {"b": False})["verdict"] == "pass"
    assert combine("x", {"a": good, "b": bad})["verdict"] == "fail"


def test_to_jsonable():
    converted = to_jsonable({"a": np.array([1.0, np.inf]), "b": 1 + 2j, "c": np.bool_(True), "d": np.int64(3)})
    assert converted == {"a": [1.0, None], "b": [1.0, 2.0], "c": True, "d": 3}


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
