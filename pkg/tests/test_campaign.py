import csv
import json
from pathlib import Path

import numpy as np
import pytest

from wardnet.campaign import ExperimentConfig, generate_instance, run_campaign
from wardnet.io import DocumentError, dataset_to_dict, digest, dnn_to_dict

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _doc(**over):
    doc = {
        "network": {"layer_sizes": [2, 3, 2], "seed": 1},
        "data": {"n_samples": 2, "seed": 2, "normalized": True},
        "loss": {"beta": 2, "coefficients": "random", "seed": 3},
        "train": {"mode": "marginal", "restarts": 2},
        "seeds": 2,
    }
    doc.update(over)
    return doc


def test_generate_instance_is_deterministic():
    a = generate_instance([2, 3, 3], (5, 6))
    b = generate_instance([2, 3, 3], (5, 6))
    assert json.dumps(dnn_to_dict(a[0])) == json.dumps(dnn_to_dict(b[0]))
    assert json.dumps(dataset_to_dict(a[1])) == json.dumps(dataset_to_dict(b[1]))
    c = generate_instance([2, 3, 3], (5, 7))
    assert json.dumps(dataset_to_dict(a[1])) != json.dumps(dataset_to_dict(c[1]))


def test_generated_instance_shape_and_normalization():
    dnn, data = generate_instance([2, 3, 3], (0, 0), n_samples=4)
    assert dnn.layer_sizes == (2, 3, 3)
    for w in dnn.weights:
        assert w.min() > 0
        np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-15)
    np.testing.assert_allclose(data.X.sum(axis=1), 1.0, atol=1e-15)
    assert data.normalized_inputs
    np.testing.assert_array_equal(data.Y.sum(axis=1), 1.0)


def test_narrow_hidden_layer_is_rejected():
    with pytest.raises(ValueError, match="hidden"):
        generate_instance([2, 1, 3], (0, 0))
    with pytest.raises(DocumentError, match="network"):
        ExperimentConfig.from_dict(_doc(network={"layer_sizes": [2, 1, 3]}))


@pytest.mark.parametrize("change, field", [
    ({"network": None}, "network"),
    ({"network": {"seed": 1}}, "network.layer_sizes"),
    ({"loss": {"beta": 1.0}}, "loss"),
    ({"train": {"learning_rate": 0.1}}, "train"),
    ({"train": {"restarts": 0}}, "train"),
    ({"seeds": 0}, "seeds"),
    ({"seeds": "many"}, "seeds"),
])
def test_config_errors_name_the_field(change, field):
    doc = _doc(**change)
    if doc["network"] is None:
        del doc["network"]
    with pytest.raises(DocumentError, match=f"'{field}'"):
        ExperimentConfig.from_dict(doc)


def test_malformed_network_file_names_the_field(tmp_path):
    (tmp_path / "net.json").write_text(json.dumps({"layer_sizes": [1, 2], "samples": []}))
    with pytest.raises(DocumentError) as info:
        ExperimentConfig.from_dict({"network": {"file": "net.json"}}, base_dir=tmp_path)
    assert "'weights'" in str(info.value) and "net.json" in str(info.value)
    with pytest.raises(DocumentError, match="missing.json"):
        ExperimentConfig.from_dict({"network": {"file": "missing.json"}}, base_dir=tmp_path)


def test_digest_ignores_key_order():
    a = _doc()
    b = dict(reversed(list(a.items())))
    assert digest(a) == digest(b)


def test_f1_campaign(tmp_path):
    doc = json.loads((CONFIGS / "campaign_f1.json").read_text())
    rec = run_campaign(ExperimentConfig.from_dict(doc, base_dir=CONFIGS, out=tmp_path))
    assert rec.n_passed == 5 and rec.passed
    assert all(r.equilibrium for r in rec.results)
    assert all(abs(r.poa - 1.0) <= 1e-12 for r in rec.results)
    with open(tmp_path / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert all(abs(float(r["poa"]) - 1.0) <= 1e-12 for r in rows)
    saved = json.loads((tmp_path / "run_record.json").read_text())
    assert saved["n_passed"] == 5 and "wall_clock" in saved and "toolkit_version" in saved


def test_campaign_is_reproducible(tmp_path):
    cfg = ExperimentConfig.from_dict(_doc())
    a, b = run_campaign(cfg), run_campaign(cfg)
    assert json.dumps(a.numeric_dict()) == json.dumps(b.numeric_dict())


def test_parallel_matches_serial():
    cfg = ExperimentConfig.from_dict(_doc(seeds=[0, 1, 2]))
    assert run_campaign(cfg, workers=2).numeric_dict() == run_campaign(cfg).numeric_dict()


def test_failures_are_recorded_with_context():
    cfg = ExperimentConfig.from_dict(_doc(train={"mode": "marginal", "max_iter": 1, "tol": 1e-14}))
    rec = run_campaign(cfg)
    assert not rec.passed
    fail = rec.results[0].failures[0]
    assert {"module", "operation", "check", "tolerance", "detail"} <= set(fail)
    assert fail["check"] == "converged" and fail["tolerance"] == 1e-14
