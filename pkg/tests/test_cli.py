import json
import subprocess
import sys

import pytest

from qdcauth.harness.cli import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, main


def write(tmp_path, **cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_run_writes_report(tmp_path):
    out = tmp_path / "r.json"
    cfg = write(tmp_path, N=8, v=8, message="a5", trials=3)
    assert main(["run", "--config", cfg, "--seed", "9", "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["config"]["seed"] == 9 and len(data["trials"]) == 3
    assert data["aggregates"]["message_delivered_rate"] == 1.0


def test_run_defaults_to_stdout(capsys):
    assert main(["run", "--trials", "2", "--format", "csv"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 3


def test_attack_overrides_config(tmp_path):
    out = tmp_path / "r.json"
    cfg = write(tmp_path, message_bits=16, trials=4)
    code = main(["attack", "--name", "trent_plus_state", "--protocol", "zhang", "--config", cfg, "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads(out.read_text())["aggregates"]["attack_success_rate"] == 1.0


@pytest.mark.parametrize(
    "cfg",
    [dict(trials=0), dict(v=2), dict(bogus=1), dict(protocol="lee", attack="eve_intercept")],
)
def test_validation_exit_code(tmp_path, cfg, capsys):
    assert main(["run", "--config", write(tmp_path, **cfg)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["run", "--config", str(p)]) == EXIT_CONFIG


def test_oracle_prints_distribution(capsys):
    assert main(["oracle", "--scenario", "swap"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4 and all(l.startswith("0.250000000000\t") for l in lines)


def test_oracle_list_and_unknown(capsys):
    assert main(["oracle", "--list"]) == EXIT_OK
    assert "swap" in capsys.readouterr().out.split()
    assert main(["oracle", "--scenario", "nope"]) == EXIT_CONFIG


def test_selftest_subset_passes(capsys):
    assert main(["selftest", "--only", "1,3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS criterion") == 2


def test_selftest_failure_exit_code(monkeypatch, capsys):
    from qdcauth.harness import selftest

    monkeypatch.setattr(selftest, "CHECKS", [("1", "forced", lambda: (False, "forced failure"))])
    assert main(["selftest", "--only", "1"]) == EXIT_ACCEPTANCE
    assert "FAIL criterion 1" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qdcauth", "oracle", "--scenario", "deterministic"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "1.000000000000\tdone"
