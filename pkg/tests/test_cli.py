import json
from pathlib import Path

import pytest

from meshless_lab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path), "--quiet"])


def test_predict_defaults(tmp_path, capsys):
    assert main(["predict", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "n=2 mu1=0 U=H^4: m_tilde-m-2" in out
    assert "n=2 mu1=1 U=H^4: None" in out
    rows = json.loads((tmp_path / "report.json").read_text())["predictions"]
    assert len(rows) == 16


def test_predict_with_m_tilde(tmp_path):
    cfg = tmp_path / "p.yaml"
    cfg.write_text("m: 3\nmu1: 1\nn: 2\nm_tilde: 9\n")
    assert run(tmp_path, "predict", "--config", str(cfg)) == 0
    rows = json.loads((tmp_path / "report.json").read_text())["predictions"]
    assert rows == [{"n": 2, "m": 3, "mu1": 1, "U": "H^5", "order": 4.0, "text": "4"}]


def test_verify_fractional(tmp_path):
    assert run(tmp_path, "verify-fractional", "--config", str(CONFIGS / "verify_fractional.yaml")) == 0
    reports = json.loads((tmp_path / "report.json").read_text())["reports"]
    assert [r["verdict"] for r in reports] == ["bounded"] * 3


def test_verify_sampling(tmp_path):
    assert run(tmp_path, "verify-sampling", "--config", str(CONFIGS / "verify_sampling.yaml")) == 0
    lines = (tmp_path / "sampling.csv").read_text().splitlines()
    assert lines[0] == "d,lhs,term1,term2,c_emp" and len(lines) == 5


def test_verify_sampling_rejects_hypotheses(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("function: trig\nr: 2\nl: 0.5\nd: [0.1, 0.05, 0.025]\n")
    assert run(tmp_path, "verify-sampling", "--config", str(cfg)) == 2
    assert "r - l" in capsys.readouterr().err


def test_convergence_outputs(tmp_path):
    assert run(tmp_path, "convergence", "--config", str(CONFIGS / "synthesized.yaml")) == 0
    for name in ("report.json", "errors.csv", "rates.csv"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "rates.csv").read_text().splitlines()[1].startswith("\"H^0,2\",exact")


def test_convergence_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("h: [0.2, 0.1, 0.05]\nnorms: [[0, 2]]\nbeta: false\nrate_tolerance: -100\n")
    assert run(tmp_path, "convergence", "--config", str(cfg)) == 1


def test_solve(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("h: [0.1]\nnorms: [[0, 2], [2, 2]]\nbeta: false\n")
    assert run(tmp_path, "solve", "--config", str(cfg)) == 0
    lines = (tmp_path / "errors.csv").read_text().splitlines()
    assert lines[0] == "h,norm_l,norm_q,error" and len(lines) == 3


def test_seed_override(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problem: synthesized\nh: [0.2, 0.1, 0.05]\nnorms: [[0, 2]]\nbeta: false\nseed: 1\n")
    assert main(["convergence", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "5", "--quiet"]) == 0
    assert json.loads((tmp_path / "a" / "report.json").read_text())["config"]["seed"] == 5


@pytest.mark.parametrize("args", [["bogus"], ["solve"], ["convergence", "--config", "/nonexistent.yaml"]])
def test_usage_errors(args, capsys):
    assert main(args) == 2


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("colour: red\n")
    assert run(tmp_path, "convergence", "--config", str(cfg)) == 2
    assert "unknown config keys" in capsys.readouterr().err
