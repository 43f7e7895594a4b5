import csv
import json

import numpy as np
import pytest

from gridssq.cli import main
from gridssq.domain import AttackEvent, save_events, save_inventory
from gridssq.neural import MlpParams, NormalizationMeta, save_model
from gridssq.simulator import LabeledDataset, save_dataset
from conftest import make_inventory


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def pipeline(tmp_path):
    """A small end-to-end run; returns the paths of its artifacts."""
    p = {
        "sim": tmp_path / "sim",
        "data": tmp_path / "data" / "all.csv",
        "train": tmp_path / "data" / "train.csv",
        "test": tmp_path / "data" / "test.csv",
        "model": tmp_path / "model.json",
        "eval": tmp_path / "eval.csv",
    }
    assert run("simulate", "--seed", 7, "--hosts", 4, "--services", 3, "--periods", 10, "--out", p["sim"]) == 0
    assert run("dataset", "--seed", 1, "--samples", 200, "--out", p["data"], "--train-count", 150,
               "--train-out", p["train"], "--test-out", p["test"]) == 0
    assert run("train", "--data", p["train"], "--out", p["model"], "--seed", 1, "--pop", 6,
               "--generations", 4, "--epochs", 3) == 0
    assert run("evaluate", "--model", p["model"], "--data", p["test"], "--out", p["eval"]) == 0
    return p


def test_simulate_is_reproducible(tmp_path, pipeline):
    assert run("simulate", "--seed", 7, "--hosts", 4, "--services", 3, "--periods", 10, "--out", tmp_path / "b") == 0
    for name in ("inventory.json", "events.jsonl"):
        assert (pipeline["sim"] / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    events = [json.loads(line) for line in (pipeline["sim"] / "events.jsonl").read_text().splitlines()]
    assert events and all(e["t"] < 600 for e in events)


def test_validation_exit_code(tmp_path):
    assert run("simulate", "--periods", 0, "--out", tmp_path / "x") == 2


def test_parse_error_exit_code(tmp_path, pipeline):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{oops\n")
    code = run("indices", "--inventory", pipeline["sim"] / "inventory.json", "--events", bad,
               "--out", tmp_path / "i.csv")
    assert code == 3


def test_indices_fixture_row(tmp_path):
    save_inventory(make_inventory([(1.0, 0.0, [1.0]), (3.0, 0.0, [1.0])]), tmp_path / "inv.json")
    save_events([AttackEvent(3.0, "h0", "s0", "dos", 2.0), AttackEvent(40.0, "h0", "s0", "dos", 2.0)],
                tmp_path / "ev.jsonl")
    assert run("indices", "--inventory", tmp_path / "inv.json", "--events", tmp_path / "ev.jsonl",
               "--out", tmp_path / "idx.csv") == 0
    rows = read_csv(tmp_path / "idx.csv")
    assert len(rows) == 10
    assert float(rows[0]["R_L"]) == pytest.approx(50.0, abs=1e-12)
    assert all(float(r["R_L"]) == 0.0 for r in rows[1:])
    assert (tmp_path / "idx.csv.manifest.json").exists()


def test_quiet_indices_are_zero(tmp_path):
    save_inventory(make_inventory([(1.0, 0.3, [1.0, 2.0])]), tmp_path / "inv.json")
    (tmp_path / "ev.jsonl").write_text("")
    assert run("indices", "--inventory", tmp_path / "inv.json", "--events", tmp_path / "ev.jsonl",
               "--periods", 4, "--out", tmp_path / "idx.csv") == 0
    rows = read_csv(tmp_path / "idx.csv")
    assert len(rows) == 4
    assert all(float(v) == 0.0 for r in rows for k, v in r.items() if k != "window_index")


def test_train_history_and_baseline(tmp_path, pipeline):
    history = read_csv(str(pipeline["model"]) + ".history.csv")
    best = [float(r["best_fitness"]) for r in history]
    assert len(best) == 4 and all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert run("train", "--data", pipeline["train"], "--out", tmp_path / "bp.json", "--no-ga", "--epochs", 3) == 0
    doc = json.loads((tmp_path / "bp.json").read_text())
    assert doc["schema"] == json.loads(pipeline["model"].read_text())["schema"]


def test_evaluate_report(pipeline, capsys):
    rows = read_csv(pipeline["eval"])
    assert len(rows) == 50
    for r in rows:
        assert float(r["error"]) == float(r["predicted"]) - float(r["actual"])
    manifest = json.loads((pipeline["eval"].parent / "eval.csv.manifest.json").read_text())
    assert {"mae", "max_abs_error", "within_band"} <= set(manifest["results"])


def constant_model(tmp_path, value_norm, y_range):
    params = MlpParams(np.zeros((2, 8)), np.zeros((1, 2)), np.zeros(2), np.array([-value_norm]))
    meta = NormalizationMeta(np.zeros(8), np.ones(8) * 10, np.array([y_range[0]]), np.array([y_range[1]]))
    save_model(params.with_norm(meta), tmp_path / "const.json")
    return tmp_path / "const.json"


def test_perfect_fit_has_zero_mae(tmp_path, capsys):
    model = constant_model(tmp_path, 0.5, (40.0, 60.0))
    x = np.random.default_rng(0).uniform(0, 10, (5, 8))
    ds = LabeledDataset(x, np.full((5, 1), 0.5), NormalizationMeta.fit(x, np.array([[40.0], [60.0]])))
    save_dataset(ds, tmp_path / "fit.csv")
    assert run("evaluate", "--model", model, "--data", tmp_path / "fit.csv", "--out", tmp_path / "e.csv") == 0
    assert "MAE=0.000000" in capsys.readouterr().out


def test_predict_shapes_and_values(tmp_path, pipeline, capsys):
    model = constant_model(tmp_path, 0.5, (40.0, 60.0))
    row = ",".join(["1.5"] * 8)
    assert run("predict", "--model", model, "--features", row, "--features", row, "--features", row) == 0
    lines = capsys.readouterr().out.split()
    assert len(lines) == 3
    assert all(abs(float(v) - 50.0) <= 1e-6 for v in lines)
    assert run("predict", "--model", pipeline["model"], "--input", pipeline["test"]) == 0
    assert len(capsys.readouterr().out.split()) == 50


def test_predict_wrong_arity(tmp_path):
    model = constant_model(tmp_path, 0.5, (0.0, 1.0))
    assert run("predict", "--model", model, "--features", "1,2,3") == 3


def test_regimes_summary(tmp_path):
    assert run("regimes", "--out", tmp_path / "reg") == 0
    summary = json.loads((tmp_path / "reg" / "summary.json").read_text())
    assert summary["correlated"]["mean_host_vulnerability"] > summary["resilient"]["mean_host_vulnerability"]


def artifact_bytes(paths):
    return [p.read_bytes() for p in paths]


def test_reruns_are_byte_identical(tmp_path, pipeline):
    cases = {
        "sim/manifest.json": ["inventory.json", "events.jsonl"],
        "data/all.csv.manifest.json": ["all.csv", "all.csv.meta.json", "train.csv", "test.csv"],
        "model.json.manifest.json": ["model.json", "model.json.history.csv"],
        "eval.csv.manifest.json": ["eval.csv"],
    }
    root = pipeline["model"].parent
    for manifest, names in cases.items():
        origin = (root / manifest).parent
        out = tmp_path / "rerun" / manifest.replace("/", "_")
        assert run("rerun", root / manifest, "--out-dir", out) == 0
        for name in names:
            assert (out / name).read_bytes() == (origin / name).read_bytes(), (manifest, name)


def test_threads_do_not_change_the_model(tmp_path, pipeline):
    assert run("train", "--data", pipeline["train"], "--out", tmp_path / "t.json", "--seed", 1, "--pop", 6,
               "--generations", 4, "--epochs", 3, "--threads", 3) == 0
    assert (tmp_path / "t.json").read_bytes() == pipeline["model"].read_bytes()
