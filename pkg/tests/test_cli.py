import csv
import json

import numpy as np
import pytest

from offsetspike.calibrate import CalibConfig, evaluate
from offsetspike.cli import main
from offsetspike.data import make_dataset
from offsetspike.modelio import load_snn

SMALL = ["--dataset", "blobs:3:2", "--n", "400", "--seed", "1"]


@pytest.fixture(scope="module")
def models(tmp_path_factory):
    d = tmp_path_factory.mktemp("models")
    assert main(["train", *SMALL, "--hidden", "16,16", "--epochs", "30", "--out", str(d / "ann.json")]) == 0
    assert main(["convert", str(d / "ann.json"), "--out", str(d / "snn.json")]) == 0
    return d


def _eval(models, out, *extra):
    return main(["eval", str(models / "snn.json"), "--out-dir", str(out), *extra])


def test_train_records_dataset_and_seed(models):
    head = json.loads((models / "ann.json").read_text())["header"]
    assert head["format_version"] == 1 and head["kind"] == "qcfs" and head["seed"] == 1
    assert head["dataset"] == {"name": "blobs:3:2", "n": 400, "seed": 1, "test_fraction": 0.5}
    snn_head = json.loads((models / "snn.json").read_text())["header"]
    assert snn_head["kind"] == "snn" and snn_head["dataset"] == head["dataset"]


def test_eval_writes_summary_and_log(models, tmp_path):
    assert _eval(models, tmp_path, "--log", str(tmp_path / "calib.jsonl")) == 0
    summary = json.loads((tmp_path / "eval.json").read_text())
    assert summary["T"] == 4 and summary["rho"] == 4 and summary["total_steps"] == 8
    assert summary["dataset_seed"] == 1 and summary["n_samples"] == 200
    with open(tmp_path / "eval.csv") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["accuracy"]) == summary["accuracy"]
    for line in (tmp_path / "calib.jsonl").read_text().splitlines():
        rec = json.loads(line)
        assert {"layer", "epoch", "neuron", "judgment", "shift_direction", "distance"} <= set(rec)


def test_eval_none_equals_plain_run(models, tmp_path):
    assert _eval(models, tmp_path, "--mode", "none", "--iterations", "0") == 0
    acc = json.loads((tmp_path / "eval.json").read_text())["accuracy"]
    ds = make_dataset("blobs:3:2", n=400, seed=1).split(0.5, seed=1)[1]
    assert acc == evaluate(load_snn(models / "snn.json"), ds.X, ds.y, CalibConfig(mode="none")).accuracy


def test_eval_is_deterministic(models, tmp_path):
    assert _eval(models, tmp_path / "a", "--threads", "3") == 0
    assert _eval(models, tmp_path / "b") == 0
    assert (tmp_path / "a" / "eval.json").read_text() == (tmp_path / "b" / "eval.json").read_text()


def test_seed_from_environment(models, tmp_path, monkeypatch):
    monkeypatch.setenv("OFFSETSPIKE_SEED", "7")
    out = tmp_path / "m.json"
    assert main(["train", "--dataset", "xor", "--n", "100", "--hidden", "4", "--epochs", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["header"]["seed"] == 7


def test_config_precedence(models, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"iterations": 3, "mode": "shift", "rho": 2}))
    assert _eval(models, tmp_path / "a", "--config", str(cfg), "--iterations", "2") == 0
    summary = json.loads((tmp_path / "a" / "eval.json").read_text())
    assert summary["iterations"] == 2 and summary["rho"] == 2 and summary["total_steps"] == 4 + 2 * 2


def test_diagnose_outputs(models, tmp_path):
    rc = main(["diagnose", str(models / "ann.json"), str(models / "snn.json"), "--out-dir", str(tmp_path),
               "--iterations-sweep", "0,1,2,4"])
    assert rc == 0
    for name in ("distribution.csv", "distribution_calibrated.csv", "metrics.csv"):
        assert (tmp_path / name).is_file()
    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    last = max(int(r["layer"]) for r in rows)
    ratios = [float(r["ratio"]) for r in rows if int(r["layer"]) == last]
    assert ratios == sorted(ratios)


def test_diagnose_constrained_and_matched(models, tmp_path):
    for flag in ("--constrained", "--matched"):
        out = tmp_path / flag.strip("-")
        assert main(["diagnose", str(models / "ann.json"), str(models / "snn.json"), "--out-dir", str(out), flag]) == 0


def test_exit_codes(models, tmp_path, capsys):
    assert _eval(models, tmp_path, "--T", "0") == 7
    assert main(["eval", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["eval", str(bad), "--out-dir", str(tmp_path)]) == 4
    assert main(["eval", str(models / "ann.json"), "--out-dir", str(tmp_path)]) == 4
    assert _eval(models, tmp_path, "--dataset", "blobs:3:5") == 5
    out = tmp_path / "never.json"
    rc = main(["train", *SMALL, "--hidden", "4", "--epochs", "1", "--min-accuracy", "1.01", "--out", str(out)])
    assert rc == 6 and not out.exists()
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert _eval(models, tmp_path, "--config", str(cfg)) == 7
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("error: ") for line in err)


def test_failed_eval_leaves_no_artifacts(models, tmp_path):
    out = tmp_path / "o"
    assert _eval(models, out, "--dataset", "blobs:3:5") == 5
    assert not (out / "eval.json").exists()


def test_default_dataset_is_the_toy_fixture():
    from offsetspike.experiments import toy_mlp

    ds = make_dataset("blobs:4:2:0.3", n=3000, seed=0)
    train, test = ds.split(0.5, seed=0)
    toy = toy_mlp(0)
    assert np.array_equal(test.X, toy.test.X) and np.array_equal(train.y, toy.train.y)


def test_shift_not_below_none_on_default_toy(tmp_path):
    # same model and data as the seed-0 calibration-benefit acceptance case
    assert main(["train", "--seed", "0", "--out", str(tmp_path / "ann.json")]) == 0
    assert main(["convert", str(tmp_path / "ann.json"), "--out", str(tmp_path / "snn.json")]) == 0
    acc = {}
    for mode in ("shift", "none"):
        out = tmp_path / mode
        assert main(["eval", str(tmp_path / "snn.json"), "--mode", mode, "--out-dir", str(out)]) == 0
        acc[mode] = json.loads((out / "eval.json").read_text())["accuracy"]
    assert acc["shift"] >= acc["none"], acc
