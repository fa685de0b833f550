import json
import random
import subprocess
import sys

import pytest

from cfrisk.cli import main
from cfrisk.distributions import dump_model, load_model, random_model, random_system, uniform_model
from cfrisk.spaces import LossTensor, Spaces, dump_loss, load_loss

from test_additivity import PUBLISHED_GRID

SP = Spaces(2, 2)
CLASSIF = ["l0=1", "l1=0", "lt0=0", "lt1=1/2", "c0=0", "c1=1/10"]
ASYM = ["lR0=1", "lR1=0", "lH0=3", "lH1=0", "l0=0", "l1=0", "c0=0", "c1=0"]
TRI = ["l0=1", "l1=0", "c0=0", "c1=1/10", "c2=3/10", "r0=1/2", "r1=1/4"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def params(values):
    return [a for v in values for a in ("--param", v)]


@pytest.fixture
def files(tmp_path, capsys):
    paths = {}
    for name, example, values in (("classif", "classification-general", CLASSIF), ("asym", "asymmetric", ASYM),
                                  ("tri", "trichotomous", TRI)):
        paths[name] = tmp_path / f"{name}.json"
        assert run(capsys, "example", example, *params(values), "--out", paths[name])[0] == 0
    rng = random.Random(0)
    first = random_model(SP, rng)
    second = random_system({"all": first.outcome_law()}, SP, rng)
    for name, model in (("uniform", uniform_model(SP)), ("m1", first), ("m2", second)):
        paths[name] = tmp_path / f"{name}.json"
        paths[name].write_text(dump_model(model))
    paths["other"] = tmp_path / "other.json"
    paths["other"].write_text(dump_model(random_model(SP, rng)))
    paths["generic"] = tmp_path / "generic.json"
    paths["generic"].write_text(dump_loss(LossTensor(SP, {"all": [3, 1, 4, 1, 5, 9, 2, 6]})))
    return paths


def test_matrix_grid(capsys):
    code, out, _ = run(capsys, "matrix", "--K", 2, "--M", 2, "--variant", "full", "--paper-layout")
    assert code == 0
    assert [[int(t) for t in line.split()] for line in out.splitlines()] == PUBLISHED_GRID


def test_matrix_json(capsys):
    code, out, _ = run(capsys, "matrix", "--K", 2, "--M", 2, "--variant", "restricted", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["rank"] == 6 and len(doc["rows"]) == 8 and len(doc["rows"][0]) == 8


def test_check_additivity(capsys, files):
    code, out, _ = run(capsys, "check-additivity", "--loss", files["classif"])
    doc = json.loads(out)
    assert code == 0 and doc["additive"] and doc["regime"] == "Exact"
    code, out, err = run(capsys, "check-additivity", "--loss", files["asym"])
    doc = json.loads(out)
    assert code == 3 and not doc["additive"] and doc["regime"] == "Unidentifiable"
    assert "not additive" in err


def test_weights_roundtrip(capsys, files, tmp_path):
    out_path = tmp_path / "w.json"
    assert run(capsys, "weights", "--loss", files["classif"], "--out", out_path)[0] == 0
    from cfrisk.additivity import load_decomposition
    dec = load_decomposition(out_path)
    assert dec.reconstruct() == load_loss(files["classif"])
    assert run(capsys, "weights", "--loss", files["asym"])[0] == 3


def test_risk(capsys, files):
    code, out, _ = run(capsys, "risk", "--loss", files["classif"], "--model", files["uniform"])
    doc = json.loads(out)
    assert code == 0
    assert doc["true"]["total"] == doc["identified"]["total"] == "4/5"
    assert "accuracy" in doc["terms"]["all"]
    code, out, _ = run(capsys, "risk", "--loss", files["classif"], "--model", files["uniform"], "--mode", "float")
    assert json.loads(out)["true"]["total"] == pytest.approx(0.8)
    code, out, _ = run(capsys, "risk", "--loss", files["classif"], "--model", files["uniform"], "--table")
    assert code == 0 and "accuracy" in out
    code, out, _ = run(capsys, "risk", "--loss", files["asym"], "--model", files["uniform"])
    assert code == 0 and json.loads(out)["identified"] is None


def test_risk_diff(capsys, files):
    code, out, _ = run(capsys, "risk-diff", "--loss", files["classif"], "--model", files["m1"], "--model", files["m2"])
    doc = json.loads(out)
    assert code == 0 and doc["identified_difference"] == doc["true_difference"]
    assert run(capsys, "risk-diff", "--loss", files["classif"], "--model", files["m1"])[0] == 2
    assert run(capsys, "risk-diff", "--loss", files["classif"], "--model", files["m1"], "--model", files["other"])[0] == 2


def test_optimize_policy(capsys, files):
    code, out, _ = run(capsys, "optimize-policy", "--loss", files["classif"], "--model", files["uniform"])
    doc = json.loads(out)
    assert code == 0 and "policy" in doc and "report" in doc


def test_to_standard_and_std_exists(capsys, files):
    code, out, _ = run(capsys, "to-standard", "--loss", files["classif"])
    assert code == 0 and json.loads(out)["K"] == 2
    code, out, _ = run(capsys, "std-exists", "--loss", files["tri"])
    doc = json.loads(out)
    assert code == 3 and doc["kind"] == "NoStandardLoss" and "witness" in doc
    assert run(capsys, "std-exists", "--loss", files["classif"])[0] == 2


def test_oracle_modes(capsys, files):
    code, out, _ = run(capsys, "oracle", "--loss", files["asym"], "--model", files["uniform"], "--variant", "b")
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "level"
    interval = doc["intervals"][0]
    assert (interval["min"], interval["max"]) == ("1/4", "3/4")
    for key in ("p1", "p2"):
        back = load_model(interval["counterexample"][key])
        assert back.spaces == SP
    code, out, _ = run(capsys, "oracle", "--loss", files["classif"], "--model", files["m1"], "--model", files["m2"])
    assert code == 0 and json.loads(out)["intervals"][0]["identifiable"]
    code, out, _ = run(capsys, "oracle", "--loss", files["generic"], "--trials", 3, "--variant", "b")
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "certify" and doc["agreement"]
    assert "counterexample" in doc


def test_oracle_guard(capsys, tmp_path):
    path = tmp_path / "big.json"
    path.write_text(dump_loss(LossTensor.zeros(Spaces(3, 3))))
    code, _, err = run(capsys, "oracle", "--loss", path, "--trials", 1)
    assert code == 4 and "guard" in err


def test_simulate_and_estimate(capsys, files, tmp_path):
    records = tmp_path / "r.csv"
    assert run(capsys, "simulate", "--model", files["uniform"], "--n", 20000, "--seed", 3, "--out", records)[0] == 0
    first = records.read_text()
    run(capsys, "simulate", "--model", files["uniform"], "--n", 20000, "--seed", 3, "--out", records)
    assert records.read_text() == first
    code, out, _ = run(capsys, "estimate", "--records", records, "--loss", files["classif"])
    doc = json.loads(out)
    assert code == 0 and doc["n"] == 20000
    assert abs(doc["report"]["total"] - 0.8) < 0.05
    assert run(capsys, "simulate", "--model", files["uniform"], "--n", 0, "--seed", 1)[0] == 2


def test_example_decomposition_and_strata(capsys):
    code, out, _ = run(capsys, "example", "classification-general", *params(CLASSIF), "--decomposition", "--strata", "a,b")
    assert code == 0 and [s["label"] for s in json.loads(out)["strata"]] == ["a", "b"]
    assert run(capsys, "example", "classification-general", "--param", "l0=1")[0] == 2
    assert run(capsys, "example", "asymmetric", *params(ASYM), "--decomposition")[0] == 2
    assert run(capsys, "example", "classification", "--param", "oops")[0] == 2


def test_invalid_inputs(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "check-additivity", "--loss", bad)[0] == 2
    assert run(capsys, "check-additivity", "--loss", tmp_path / "missing.json")[0] == 2
    bad.write_text(json.dumps({"K": 2, "M": 2, "strata": [{"label": "all", "entries": []}]}))
    code, _, err = run(capsys, "check-additivity", "--loss", bad)
    assert code == 2 and "missing entry" in err
    with pytest.raises(SystemExit) as exc:
        main(["matrix"])
    assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cfrisk", "matrix", "--K", "2", "--M", "2", "--format", "json"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["rank"] == 7
