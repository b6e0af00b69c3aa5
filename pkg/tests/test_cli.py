import csv
import json

import pytest

from wavegec.cli import CONFIG_SCHEMA, config_hash, main

CLASS = {
    "t0": 1, "lambda1": 1, "lambda2": 4,
    "gamma": {"form": "power", "beta": 0.2}, "stab": {"form": "power", "alpha": -0.2},
}


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_schema_subcommand(capsys):
    assert main(["schema"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == json.loads(json.dumps(CONFIG_SCHEMA))


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_invalid_config_is_reported(tmp_path, capsys):
    path = write(tmp_path, {"class": CLASS, "integrator": {"eta": 3}})
    assert main(["classify", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert "integrator/eta" in capsys.readouterr().err


def test_classify_power(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["classify", "--config", write(tmp_path, {"class": CLASS}), "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "growth exponent 0.2"
    manifest = json.loads((out / "manifest_classify.json").read_text())
    assert manifest["files"][0]["file"] == "classification.json"


def test_simulate_is_deterministic(tmp_path):
    config = {
        "simulate": {"runs": [{
            "coefficient": {"kind": "dgcs", "m": 1, "lambda": 5, "eps": 0.1, "name": "r"},
            "lambda": 5, "t_start": 0, "t_end": 4, "closed_form": True, "points": 21,
        }]},
    }
    path = write(tmp_path, config)
    hashes = []
    for name in ("a", "b"):
        assert main(["simulate", "--config", path, "--out", str(tmp_path / name), "--seedless"]) == 0
        manifest = json.loads((tmp_path / name / "manifest_simulate.json").read_text())
        hashes.append(manifest["files"])
    assert hashes[0] == hashes[1]
    rows = list(csv.DictReader(open(tmp_path / "a" / "trace_r.csv")))
    last = rows[-1]
    assert float(last["v"]) == pytest.approx(float(last["w_prime_closed"]), rel=1e-6)


def test_certify_constant_and_report(tmp_path):
    config = {
        "class": CLASS,
        "certify": {
            "coefficients": [{"kind": "constant", "c_inf": 2.5, "name": "flat"}],
            "lambdas": [0.1, 1, 10], "times": {"geomspace": [1.5, 50, 4]},
        },
    }
    out = tmp_path / "o"
    assert main(["certify", "--config", write(tmp_path, config), "--out", str(out)]) == 0
    assert json.loads((out / "certify_flat.json").read_text())["passed"] is True
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "overlay_flat.csv").exists()
    assert "certify_flat.json: passed=True" in (out / "summary.txt").read_text()


def test_report_on_empty_directory(tmp_path):
    out = tmp_path / "empty"
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "summary.txt").read_text().startswith("artifacts: 0")


def test_missing_config_is_usage_error(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
