import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from wardnet.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
F1 = str(CONFIGS / "f1.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_json(capsys):
    code, out, _ = run(capsys, "validate", "--config", F1, "--json")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_global_flags_before_subcommand(capsys):
    code, out, _ = run(capsys, "--json", "--config", F1, "validate")
    assert code == 0 and json.loads(out)["passed"] is True


def test_validate_failure_exit_code(capsys, tmp_path):
    doc = json.loads(Path(F1).read_text())
    doc["weights"] = [[[0.7], [0.5]]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", "--config", str(path))
    assert code == 1
    assert "FAIL" in out and "valid: False" in out


def test_config_errors(capsys, tmp_path):
    assert run(capsys, "validate")[0] == 2
    assert run(capsys, "validate", "--config", str(tmp_path / "nope.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "train", "--config", str(bad))[0] == 2
    assert run(capsys, "train", "--config", F1, "--tol", "-1")[0] == 2
    assert run(capsys, "relu-scaling", "--config", F1, "--rho", "2")[0] == 2
    assert run(capsys, "no-such-command")[0] == 2


def test_build_game_writes_documents(capsys, tmp_path):
    code, out, _ = run(capsys, "build-game", "--config", str(CONFIGS / "f3_classification.json"),
                       "--out", str(tmp_path), "--json")
    doc = json.loads(out)
    assert code == 0
    assert doc["counts"]["J"] == 6
    assert doc["certificate"]["ok"] is True
    assert (tmp_path / "game.json").exists() and (tmp_path / "certificate.json").exists()


def test_train_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "train", "--config", F1, "--mode", "marginal", "--restarts", "3",
                       "--seed", "4", "--out", str(tmp_path), "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["final_loss"] == pytest.approx(2 / 3, abs=1e-6)
    with open(tmp_path / "losses.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["restart", "seed", "final_loss", "converged"]
    assert len(rows) == 4


def test_train_not_converged_exit_code(capsys):
    assert run(capsys, "train", "--config", F1, "--max-iters", "1", "--tol", "1e-15")[0] == 1


def test_verify_and_poa(capsys):
    code, out, _ = run(capsys, "verify", "--config", F1, "--restarts", "2", "--json")
    assert code == 0 and json.loads(out)["success"] is True
    code, out, _ = run(capsys, "poa", "--config", F1, "--json")
    assert code == 0 and json.loads(out)["poa"] == pytest.approx(1.0, abs=1e-9)


def test_factorize(capsys, tmp_path):
    code, out, _ = run(capsys, "factorize", "--config", str(CONFIGS / "factorize.json"),
                       "--out", str(tmp_path), "--json")
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and len(doc["weights"]) == 3
    (tmp_path / "f.json").write_text(json.dumps({"widths": [2, 3]}))
    code, _, err = run(capsys, "factorize", "--config", str(tmp_path / "f.json"))
    assert code == 2 and "'target'" in err


def test_relu_scaling(capsys):
    code, out, _ = run(capsys, "relu-scaling", "--config", F1, "--rho", "0.5", "--samples", "2000",
                       "--seed", "1", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["ok"]
    assert doc["ratio"] == pytest.approx(0.25, abs=1e-12)
    assert doc["monte_carlo"]["n_samples"] == 2000


def test_sqloss_check(capsys):
    code, out, _ = run(capsys, "sqloss-check", "--config", str(CONFIGS / "binary.json"), "--json")
    doc = json.loads(out)
    assert code == 0 and doc["c_equals_2"] and doc["ratio"] == pytest.approx(2.0, abs=1e-12)
    code, out, _ = run(capsys, "sqloss-check", "--config", str(CONFIGS / "binary.json"),
                       "--restarts", "1", "--json")
    assert code == 0 and json.loads(out)["training"]["ok"]
    code, out, _ = run(capsys, "sqloss-check", "--config", str(CONFIGS / "f3_classification.json"), "--json")
    doc = json.loads(out)
    assert code == 0 and not doc["c_equals_2"]


def test_campaign_command(capsys, tmp_path):
    code, out, _ = run(capsys, "campaign", "--config", str(CONFIGS / "campaign_f1.json"),
                       "--out", str(tmp_path))
    assert code == 0 and "5/5 seeds passed" in out
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "losses.csv").exists()


def test_campaign_bad_config(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"network": {"file": "missing.json"}}))
    code, _, err = run(capsys, "campaign", "--config", str(path))
    assert code == 2 and "network.file" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wardnet", "validate", "--config", F1],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "valid: True" in proc.stdout
