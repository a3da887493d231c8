"""
Tests for the run-file parser and the command-line entry point
"""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from config.config import Config
from src.cli.main import main
from src.cli.run_config import (
    RunConfigError, fold_sections, load_run_config, parse_overrides, resolve_output_dir
)
from src.core.coefficients import power_law_profile
from src.core.pipeline import Laboratory

FAST = ["--override", "mesh.n=16", "--override", "time.t_final=0.5", "--override", "time.dt=0.01"]


def _run(mode, config, out, *extra):
    return main([mode, "--config", str(config), "--out", str(out), *FAST, *extra])


def test_fold_sections():
    nested = fold_sections({"mesh.n": "64", "lambda": "0.1", "mesh.q": "", "seed": None})
    assert nested == {"mesh": {"n": "64"}, "lambda": "0.1"}
    with pytest.raises(RunConfigError):
        fold_sections({"a.b.c": "1"})


def test_parse_overrides():
    assert parse_overrides(["mesh.n = 32", "lambda=-0.1"]) == {"mesh.n": "32", "lambda": "-0.1"}
    with pytest.raises(RunConfigError):
        parse_overrides(["mesh.n"])


def test_load_reference_run_file(test_data_dir):
    config = load_run_config(test_data_dir / "reference.cfg", ["mesh.n=16"], "certify")
    assert config.mode == "certify"
    assert config.a.alpha == 0.5 and config.b.mu == 0.1 and config.d.gamma == 0.25
    assert config.beta_damp == 1.0 and config.lam == 0.0
    assert config.mesh.n == 16
    assert config.time.stride == 10
    assert config.sweep.relative is True
    assert len(config.sweep_values()) == 16


def test_invalid_run_files_are_rejected(test_data_dir):
    reference = test_data_dir / "reference.cfg"
    with pytest.raises(ValidationError):
        load_run_config(reference, ["mesh.size=16"])
    with pytest.raises(ValidationError):
        load_run_config(reference, ["time.dt=nan"])
    with pytest.raises(ValidationError):
        load_run_config(reference, ["time.dt=-1"])
    with pytest.raises(ValidationError):
        load_run_config(reference, ["mesh.n=4"])
    with pytest.raises(ValidationError):
        load_run_config(None, ["a.alpha=0.5"])
    with pytest.raises(RunConfigError):
        load_run_config(test_data_dir / "missing.cfg")


def test_output_dir_precedence(test_data_dir, tmp_path, monkeypatch):
    config = load_run_config(test_data_dir / "reference.cfg")
    monkeypatch.setenv(Config.OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert resolve_output_dir(tmp_path / "flag", config) == tmp_path / "flag"
    assert resolve_output_dir(None, config) == tmp_path / "env"
    with_key = load_run_config(test_data_dir / "reference.cfg", [f"output.dir={tmp_path / 'key'}"])
    assert resolve_output_dir(None, with_key) == tmp_path / "key"


def test_check_reference_profile(test_data_dir, tmp_path):
    assert _run("check", test_data_dir / "reference.cfg", tmp_path) == 0
    payload = json.loads((tmp_path / "check.json").read_text())
    assert payload["degeneracy_report"]["ass2_ok"] is True
    assert payload["hardy_validation"]["holds"] is True
    assert payload["hardy_validation"]["seed"] == 20240601


def test_certify_writes_constants(test_data_dir, tmp_path, capsys):
    assert _run("certify", test_data_dir / "reference.cfg", tmp_path) == 0
    payload = json.loads((tmp_path / "certificate.json").read_text())
    for key in ("c_hp", "c_hp_tilde", "epsilon", "one_eps", "c_lambda", "refinement_levels"):
        assert key in payload, f"certify output misses {key}"
    assert payload["certificate"]["m_script"] > 0.0
    assert payload["certificate"]["lambda_hp_reading"] == "lambda*C_HP"
    fragment = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert fragment["refinement_levels"] == [16, 32, 64]


def test_certify_refuses_large_lambda(test_data_dir, tmp_path):
    """lambda = 2 / C_HP exits with 3 and names the inequality"""
    lab = Laboratory(power_law_profile(alpha=0.5, mu=0.1, gamma_d=0.25, beta_damp=1.0), n=16)
    lam = 2.0 / lab.hardy.c_hp
    code = _run("certify", test_data_dir / "reference.cfg", tmp_path, "--override", f"lambda={lam!r}")
    assert code == 3
    assert not (tmp_path / "certificate.json").exists()
    refusal = json.loads((tmp_path / "refusal.json").read_text())
    assert refusal["inequality"] == "lambda < 1/C_HP"
    assert refusal["lhs"] == lam


def test_certify_refuses_excessive_degeneracy(test_data_dir, tmp_path):
    """K_a + 2K_d = 2.2 exits with 2"""
    code = _run("certify", test_data_dir / "reference.cfg", tmp_path,
                "--override", "a.alpha=1.2", "--override", "d.gamma=0.5", "--override", "b.mu=0")
    assert code == 2
    assert not (tmp_path / "certificate.json").exists()
    refusal = json.loads((tmp_path / "refusal.json").read_text())
    assert any("K_a + 2K_d <= 2" in v for v in refusal["violations"])


def test_simulate_writes_trace(test_data_dir, tmp_path):
    assert _run("simulate", test_data_dir / "reference.cfg", tmp_path) == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == Config.TRACE_HEADER
    table = np.loadtxt(tmp_path / "trace.csv", delimiter=",", skiprows=1)
    assert table.shape == (6, 5)
    assert np.all(np.diff(table[:, 1]) <= 1e-10 * table[0, 1])


def test_outputs_are_deterministic(test_data_dir, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert _run("certify", test_data_dir / "reference.cfg", first, "--seed", "3") == 0
    assert _run("certify", test_data_dir / "reference.cfg", second, "--seed", "3") == 0
    assert (first / "certificate.json").read_bytes() == (second / "certificate.json").read_bytes()


def test_sweep_lambda(test_data_dir, tmp_path):
    code = _run("sweep", test_data_dir / "reference.cfg", tmp_path,
                "--override", "sweep.count=4", "--override", "sweep.start=0.0",
                "--override", "sweep.stop=0.6", "--override", "time.dt=0.05")
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == Config.SWEEP_HEADER
    table = np.loadtxt(tmp_path / "sweep.csv", delimiter=",", skiprows=1)
    assert table.shape == (4, 4)
    assert np.all(np.diff(table[:, 0]) > 0.0)
    # 1/M shrinks as lambda approaches 1/C_HP
    assert np.all(np.diff(table[:, 1]) < 0.0)
    assert np.all(table[:, 3] == 1.0)


def test_usage_errors(test_data_dir, tmp_path):
    assert main(["certify", "--config", str(test_data_dir / "missing.cfg"), "--out", str(tmp_path)]) == 1
    assert main(["explode"]) == 1
    assert _run("check", test_data_dir / "reference.cfg", tmp_path, "--override", "mesh.n") == 1
