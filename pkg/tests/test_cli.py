"""Batch front end: exit codes, schema validation, determinism, logging."""

import json
import logging
import os
import pathlib
import shutil
import subprocess

import numpy as np
import pytest

from conecert import cli

SAMPLES = pathlib.Path(__file__).resolve().parent.parent / "sample_problems"


def write_problem(tmp_path, doc, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def run_cli(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = cli.run(argv + ["--output", str(out)])
    return code, json.loads(out.read_text(encoding="utf-8"))


def test_l1gain_feasible_scalar(tmp_path):
    path = write_problem(
        tmp_path, {"command": "l1gain", "A": [[-2.0]], "B": [[1.0]], "gamma": 0.5}
    )
    code, doc = run_cli(["l1gain", "--input", str(path)], tmp_path)
    assert code == 0
    assert doc["status"] == "feasible"
    assert doc["tool"] == "cone-cert"
    assert doc["input_digest"].startswith("sha256:")
    np.testing.assert_allclose(doc["result"]["certificate"]["p"], [0.5], atol=1e-12)
    np.testing.assert_allclose(doc["result"]["gain"], 0.5, atol=1e-12)


def test_l1gain_infeasible_gamma(tmp_path):
    path = write_problem(
        tmp_path, {"command": "l1gain", "A": [[-2.0]], "B": [[1.0]], "gamma": 0.25}
    )
    code, doc = run_cli(["l1gain", "--input", str(path)], tmp_path)
    assert code == 1
    assert doc["status"] == "infeasible"
    assert doc["result"]["certificate"] is None


def test_sample_l1gain(tmp_path):
    code, doc = run_cli(["l1gain", "--input", str(SAMPLES / "l1gain_2x2.json")], tmp_path)
    assert code == 0
    np.testing.assert_allclose(doc["result"]["gain"], 3.0, atol=1e-9)
    np.testing.assert_allclose(doc["result"]["certificate"]["p"], [1.0, 2.0], atol=1e-9)


def test_sample_kyp(tmp_path):
    code, doc = run_cli(["kyp", "--input", str(SAMPLES / "kyp_scalar_passivity.json")], tmp_path)
    assert code == 0
    assert doc["status"] == "feasible"
    assert abs(doc["result"]["lmi"]["P"][0][0] - 1.0) <= 1e-4
    assert doc["result"]["frequency"]["holds"] is True
    assert doc["result"]["defects"] == []


def test_sample_decompose(tmp_path):
    code, doc = run_cli(
        ["decompose", "--input", str(SAMPLES / "decompose_synthesized.json")], tmp_path
    )
    assert code == 0
    assert doc["status"] == "holds"
    res = doc["result"]
    assert res["reconstruction_error"] <= 1e-4 * res["max_q_norm"]
    # non-finite residuals round-trip as strings ("nan" marks a zero component)
    assert all(r <= 1e-3 for r in res["ode_residuals"] if isinstance(r, float))


def test_kyp_infeasible_exit_code(tmp_path):
    path = write_problem(
        tmp_path,
        {
            "command": "kyp",
            "A": [[-1.0]],
            "B": [[1.0]],
            "M": [[0.0, 0.0], [0.0, 1.0]],
            "trials": 3,
        },
    )
    code, doc = run_cli(["kyp", "--input", str(path)], tmp_path)
    assert code == 1
    assert doc["status"] == "infeasible"
    assert doc["result"]["lmi"]["status"] == "infeasible"
    assert doc["result"]["frequency"]["holds"] is False


def test_steer_holds(tmp_path):
    path = write_problem(
        tmp_path,
        {
            "command": "steer",
            "A": [[-1.0]],
            "B": [[1.0]],
            "X0": [[0.0]],
            "X1": [[1.0]],
            "t1": 1.0,
        },
    )
    code, doc = run_cli(["steer", "--input", str(path)], tmp_path)
    assert code == 0
    assert doc["status"] == "holds"
    assert max(doc["result"]["endpoint_errors"]) <= 1e-5 * 2.0


def test_steer_uncontrollable(tmp_path):
    path = write_problem(
        tmp_path,
        {
            "command": "steer",
            "A": [[0.0, 1.0], [0.0, 0.0]],
            "B": [[1.0], [0.0]],
            "X0": [[1.0, 0.0], [0.0, 1.0]],
            "X1": [[2.0, 0.0], [0.0, 2.0]],
            "t1": 1.0,
        },
    )
    code, doc = run_cli(["steer", "--input", str(path)], tmp_path)
    assert code == 1
    assert doc["status"] == "fails"
    assert doc["result"]["controllable"] is False
    w = np.array(doc["result"]["obstruction"], dtype=float)
    assert abs(np.linalg.norm(w) - 1.0) <= 1e-9


def test_certify_psd_pinned(tmp_path):
    path = write_problem(
        tmp_path,
        {
            "command": "certify",
            "kind": "psd",
            "U": [[-1.0, 1.0]],
            "V": [[1.0, 0.0]],
            "C": [[0.0, 1.0], [1.0, 0.0]],
        },
    )
    code, doc = run_cli(["certify", "--input", str(path)], tmp_path)
    assert code == 0
    assert doc["status"] == "feasible"
    assert abs(doc["result"]["certificate"]["P"][0][0] - 1.0) <= 1e-3


def test_certify_orthant_infeasible(tmp_path):
    path = write_problem(
        tmp_path,
        {"command": "certify", "kind": "orthant", "L": [[-2.0, 1.0]], "m": [-1.0, 0.4]},
    )
    code, doc = run_cli(["certify", "--input", str(path)], tmp_path)
    assert code == 1
    assert doc["status"] == "infeasible"
    assert doc["result"]["kernel_minimum"] < -1e-7


def test_validate_clean(tmp_path):
    code, doc = run_cli(
        ["validate", "--input", str(SAMPLES / "l1gain_2x2.json")], tmp_path
    )
    assert code == 0
    assert doc["status"] == "holds"
    assert doc["result"]["violations"] == []


def test_validate_reports_field_violations(tmp_path):
    path = write_problem(
        tmp_path,
        {
            "command": "l1gain",
            "A": [[-2.0, 1.0]],
            "B": [[1.0]],
            "extra": 1,
        },
    )
    code, doc = run_cli(["validate", "--input", str(path)], tmp_path)
    assert code == 3
    assert doc["status"] == "error"
    joined = "\n".join(doc["result"]["violations"])
    assert "A: must be square" in joined
    assert "gamma: required scalar missing" in joined
    assert "extra: unknown field" in joined


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"command": "l1gain",', encoding="utf-8")
    code, doc = run_cli(["l1gain", "--input", str(path)], tmp_path)
    assert code == 3
    assert doc["status"] == "error"
    assert any("line" in d and "column" in d for d in doc["diagnostics"])


def test_missing_input(tmp_path):
    code, doc = run_cli(["l1gain", "--input", str(tmp_path / "nope.json")], tmp_path)
    assert code == 3
    assert doc["status"] == "error"
    assert any("cannot read" in d for d in doc["diagnostics"])


def test_subcommand_file_mismatch(tmp_path):
    code, doc = run_cli(
        ["kyp", "--input", str(SAMPLES / "l1gain_2x2.json")], tmp_path
    )
    assert code == 3
    assert any("subcommand" in d for d in doc["diagnostics"])


def test_kyp_horizon_override_reaches_sampler(tmp_path):
    # a horizon too short for the state to settle must surface as an error
    src = SAMPLES / "kyp_scalar_passivity.json"
    code, doc = run_cli(["kyp", "--input", str(src), "--horizon", "2.0"], tmp_path)
    assert code == 3
    assert doc["status"] == "error"
    assert any("horizon" in d for d in doc["diagnostics"])
    code, _ = run_cli(["kyp", "--input", str(src), "--horizon", "40.0"], tmp_path)
    assert code == 0


def test_seed_precedence(tmp_path):
    path = write_problem(
        tmp_path,
        {"command": "l1gain", "A": [[-2.0]], "B": [[1.0]], "gamma": 1.0, "seed": 7},
    )
    _, doc = run_cli(["l1gain", "--input", str(path)], tmp_path)
    assert doc["seed"] == 7  # file seed wins when the flag is left at its default
    _, doc = run_cli(["l1gain", "--input", str(path), "--seed", "3"], tmp_path)
    assert doc["seed"] == 3  # explicit flag overrides the file


def test_byte_determinism(tmp_path):
    src = SAMPLES / "kyp_scalar_passivity.json"
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert cli.run(["kyp", "--input", str(src), "--output", str(a)]) == 0
    assert cli.run(["kyp", "--input", str(src), "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_stdout_default(tmp_path, capsys):
    path = write_problem(
        tmp_path, {"command": "l1gain", "A": [[-2.0]], "B": [[1.0]], "gamma": 0.5}
    )
    code = cli.run(["l1gain", "--input", str(path)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "feasible"


def test_log_env_levels(monkeypatch, capsys):
    root = logging.getLogger("conecert")
    monkeypatch.setenv("CONE_CERT_LOG", "debug")
    cli._configure_logging()
    assert root.level == logging.DEBUG
    monkeypatch.setenv("CONE_CERT_LOG", "quiet")
    cli._configure_logging()
    assert root.level == logging.ERROR
    monkeypatch.setenv("CONE_CERT_LOG", "loud")
    cli._configure_logging()
    assert root.level == logging.WARNING
    assert "ignoring CONE_CERT_LOG" in capsys.readouterr().err
    monkeypatch.delenv("CONE_CERT_LOG")
    cli._configure_logging()
    assert root.level == logging.WARNING


def test_console_script(tmp_path):
    exe = shutil.which("cone-cert")
    assert exe is not None, "console script must be installed"
    out = tmp_path / "out.json"
    proc = subprocess.run(
        [exe, "l1gain", "--input", str(SAMPLES / "l1gain_2x2.json"),
         "--output", str(out)],
        capture_output=True,
        text=True,
        env={**os.environ, "CONE_CERT_LOG": "info"},
    )
    assert proc.returncode == 0
    assert json.loads(out.read_text(encoding="utf-8"))["status"] == "feasible"
    assert "running l1gain" in proc.stderr
    assert "status feasible (exit 0)" in proc.stderr
