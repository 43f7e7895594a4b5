"""End-to-end acceptance criteria 1-8, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line with the
measured quantity and runtime.
"""

import json
import random
import time

import numpy as np
import pytest

from gridssq.cli import main
from gridssq.domain import (
    AttackEvent,
    AttackTally,
    AttackWindow,
    HostSpec,
    NetworkInventory,
    ServiceSpec,
    window_events,
)
from gridssq.evolution import (
    BpConfig,
    Dims,
    GaConfig,
    crossover,
    evolve,
    plain_train,
    run_hybrid,
    select,
    selection_probabilities,
)
from gridssq.indices import (
    compute_situation,
    correction_factor,
    corrected_host_index,
    normalize_importance,
    reliability_index,
    threat_index,
    vulnerability_index,
)
from gridssq.neural import Dataset, MlpParams, NormalizationMeta, forward, gradient, normalize_features, predict
from gridssq.simulator import ScenarioConfig, generate_scenario, regime_scenarios, split_dataset, synthesize_dataset
from oracles import naive_situation, rel_close
from test_neural import finite_difference

DATASET_SEED = 0
SPLIT_SEED = 0
TRAIN_SEEDS = (1, 2, 3, 4, 5)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


# --- 1. index oracle equivalence ----------------------------------------------


def random_instance(rng):
    hosts = []
    for k in range(rng.randint(1, 5)):
        services = [(f"s{j}", rng.uniform(0.1, 10)) for j in range(rng.randint(1, 4))]
        hosts.append((f"h{k}", rng.uniform(0.1, 10), rng.uniform(0, 1), services))
    kinds = [f"a{i}" for i in range(rng.randint(1, 6))]
    events = []
    for _ in range(rng.randint(0, 40)):
        host = rng.choice(hosts)
        svc = rng.choice(host[3])[0]
        events.append((rng.uniform(0, 59.999), host[0], svc, rng.choice(kinds), rng.uniform(1, 3)))
    return hosts, events


def test_criterion_1_index_oracle(report):
    start = time.perf_counter()
    rng = random.Random(20221)
    worst = 0.0
    for _ in range(1000):
        hosts, raw = random_instance(rng)
        inv = NetworkInventory(
            tuple(HostSpec(h, hi, deg, tuple(ServiceSpec(s, si) for s, si in svcs)) for h, hi, deg, svcs in hosts)
        )
        window = window_events([AttackEvent(*e) for e in raw], 60.0, 60.0, inv)[0]
        rec = compute_situation(inv, window)
        rs, tr, rh, rl = naive_situation(hosts, raw, 0, 60.0)
        pairs = [(rec.network_threat, rl)]
        pairs += [(rec.service_reliability[k], v) for k, v in rs.items()]
        pairs += [(rec.host_vulnerability[k], v) for k, v in tr.items()]
        pairs += [(rec.host_corrected[k], v) for k, v in rh.items()]
        for got, want in pairs:
            if got != want:
                worst = max(worst, abs(got - want) / max(abs(got), abs(want)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    assert report(1, ok, f"max relative error {worst:.2e} over 1000 instances, {elapsed:.2f}s (limit 5s)")


# --- 2. hand-value fixtures ----------------------------------------------------


def test_criterion_2_hand_values(report):
    checks = {
        "R_s = 210": (reliability_index({"dos": AttackTally(2, 2.0), "pod": AttackTally(1, 1.5)}), 210.0),
        "TR = 23": (vulnerability_index([0.2, 0.3, 0.5], [10, 20, 30]), 23.0),
        "eta = 1.25": (correction_factor(0.25), 1.25),
        "R_H = 10": (corrected_host_index(8.0, 1.25), 10.0),
        "R_L = 7": (threat_index([0.25, 0.75], [4, 8]), 7.0),
        "O = 0.5": (
            forward(MlpParams(np.array([[1.0]]), np.array([[2.0]]), np.zeros(1), np.array([0.5])), [0.0])[1][0],
            0.5,
        ),
        "O = 1.5": (
            forward(MlpParams(np.zeros((1, 1)), np.ones((1, 1)), np.zeros(1), np.array([-1.0])), [7.0])[1][0],
            1.5,
        ),
        "p0 = 0.75": (selection_probabilities([1, 3])[0], 0.75),
        "p1 = 0.25": (selection_probabilities([1, 3])[1], 0.25),
        "child[0] = 1": (crossover([0.0, 2.0], [2.0, 0.0], 0.5).genes[0], 1.0),
        "child[1] = 1": (crossover([0.0, 2.0], [2.0, 0.0], 0.5).genes[1], 1.0),
    }
    weights = normalize_importance([2, 3, 5])
    checks.update({f"v[{i}]": (w, e) for i, (w, e) in enumerate(zip(weights, [0.2, 0.3, 0.5]))})
    inv = NetworkInventory(
        (HostSpec("h0", 1.0, 0.0, (ServiceSpec("s0", 1.0),)), HostSpec("h1", 3.0, 0.0, (ServiceSpec("s0", 1.0),)))
    )
    win = AttackWindow(0, 0.0, 60.0, {("h0", "s0"): {"dos": AttackTally(2, 2.0)}})
    checks["R_L = 50"] = (compute_situation(inv, win).network_threat, 50.0)
    failed = [name for name, (got, want) in checks.items() if abs(got - want) > 1e-12]
    assert report(2, not failed, f"{len(checks) - len(failed)}/{len(checks)} hand values within 1e-12 {failed or ''}")


# --- 3. gradient correctness ---------------------------------------------------


def test_criterion_3_gradient(report):
    start = time.perf_counter()
    rng = np.random.default_rng(33)
    worst = 0.0
    for _ in range(120):
        n, l, m = rng.integers(1, 7, size=3)
        p = MlpParams.random(int(n), int(l), int(m), rng)
        x, y = rng.normal(size=n), rng.normal(size=m)
        g = gradient(p, x, y)
        analytic = np.concatenate([a.ravel() for a in (g.w_ih, g.w_ho, g.a, g.b)])
        numeric = np.concatenate([a.ravel() for a in finite_difference(p, x, y)])
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-5 and elapsed < 10.0
    assert report(3, ok, f"max relative error {worst:.2e} over 120 nets, {elapsed:.2f}s (limit 10s)")


# --- 4. GA invariants ----------------------------------------------------------


def test_criterion_4_ga_invariants(report):
    start = time.perf_counter()
    rng = np.random.default_rng(44)
    sums_ok = order_ok = True
    for _ in range(500):
        f = rng.uniform(0, 10, size=int(rng.integers(2, 60)))
        p = selection_probabilities(f)
        sums_ok &= abs(p.sum() - 1.0) <= 1e-12
        order_ok &= bool(np.all(np.diff(p[np.argsort(f)]) < 0))
    draws = np.array([select([0, 1], [0.75, 0.25], rng)[0] for _ in range(100_000)])
    freq = float((draws == 0).mean())
    freq_ok = abs(freq - 0.75) <= 0.01

    data_rng = np.random.default_rng(4)
    x = data_rng.uniform(size=(80, 4))
    data = Dataset(x, (x[:, :1] * x[:, 1:2] + 0.3 * x[:, 3:]).reshape(-1, 1))
    mono_ok = True
    for seed in range(10):
        _, history = evolve(data, Dims(4, 5, 1), GaConfig(population=20, generations=25, seed=seed))
        best = [h.best_fitness for h in history]
        mono_ok &= all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    elapsed = time.perf_counter() - start
    ok = sums_ok and order_ok and freq_ok and mono_ok and elapsed < 30.0
    detail = (
        f"sum-to-one={sums_ok} strictly-decreasing={order_ok} roulette freq {freq:.4f} (0.75±0.01) "
        f"elite monotone over 10 runs={mono_ok}, {elapsed:.2f}s (limit 30s)"
    )
    assert report(4, ok, detail)


# --- 5/6. protocol re-run ---------------------------------------------------------


@pytest.fixture(scope="module")
def protocol_data():
    start = time.perf_counter()
    _, ds = synthesize_dataset(ScenarioConfig(seed=DATASET_SEED, feature_noise_sigma=0.02), 4000)
    train, test = split_dataset(ds, 3900, SPLIT_SEED)
    meta = NormalizationMeta(train.x.min(axis=0), train.x.max(axis=0), ds.meta.y_min, ds.meta.y_max)
    train_set = Dataset(normalize_features(meta, train.x), train.y)
    test_set = Dataset(normalize_features(meta, test.x), test.y)
    return train_set, test_set, meta, time.perf_counter() - start


def prediction_errors(params, test_set):
    return predict(params, test_set.x)[:, 0] - test_set.y[:, 0]


_hybrid_cache = {}


def hybrid_model(protocol_data, seed):
    if seed not in _hybrid_cache:
        train_set, _, meta, _ = protocol_data
        ga = GaConfig(population=40, generations=50, seed=seed)
        bp = BpConfig(epochs=200, seed=seed)
        _hybrid_cache[seed] = run_hybrid(train_set, Dims(8, 9, 1), ga, bp, meta).params
    return _hybrid_cache[seed]


def test_criterion_5_protocol(protocol_data, report):
    train_set, test_set, _, gen_time = protocol_data
    start = time.perf_counter()
    params = hybrid_model(protocol_data, TRAIN_SEEDS[0])
    elapsed = gen_time + time.perf_counter() - start
    err = prediction_errors(params, test_set)
    band = float((np.abs(err) <= 0.02).mean())
    mae = float(np.abs(err).mean())
    ok = len(train_set) == 3900 and len(test_set) == 100 and band >= 0.90 and mae <= 0.015 and elapsed < 300
    detail = (
        f"within ±0.02: {band:.2%} (need ≥90%), MAE {mae:.5f} (need ≤0.015), "
        f"max |err| {np.abs(err).max():.4f}, {elapsed:.1f}s (limit 300s)"
    )
    assert report(5, ok, detail)


def test_criterion_6_ga_benefit(protocol_data, report):
    train_set, test_set, meta, _ = protocol_data
    hybrid, plain = [], []
    for seed in TRAIN_SEEDS:
        hybrid.append(np.abs(prediction_errors(hybrid_model(protocol_data, seed), test_set)).mean())
        baseline = plain_train(train_set, Dims(8, 9, 1), BpConfig(epochs=200, seed=seed), seed, meta)
        plain.append(np.abs(prediction_errors(baseline, test_set)).mean())
    ok = np.mean(hybrid) <= np.mean(plain)
    detail = (
        f"mean test MAE hybrid {np.mean(hybrid):.5f} vs plain BP {np.mean(plain):.5f} over seeds {TRAIN_SEEDS} "
        f"(hybrid per seed {np.round(hybrid, 5).tolist()}, plain {np.round(plain, 5).tolist()})"
    )
    assert report(6, ok, detail)


# --- 7. regime contrast ----------------------------------------------------------


def test_criterion_7_regimes(report):
    stats = {}
    for name, cfg in regime_scenarios().items():
        inv, events = generate_scenario(cfg)
        recs = [compute_situation(inv, w) for w in window_events(events, cfg.dt, cfg.horizon, inv)]
        mean_tr = float(np.mean([v for r in recs for v in r.host_vulnerability.values()]))
        stats[name] = (mean_tr, sum(r.network_threat > 0 for r in recs), len(recs))
    c, r = stats["correlated"], stats["resilient"]
    ok = c[0] > r[0] and c[1] >= 8 and r[1] >= 8
    detail = (
        f"mean TR correlated {c[0]:.1f} > resilient {r[0]:.1f}; nonzero R_L windows "
        f"{c[1]}/{c[2]} and {r[1]}/{r[2]} (need ≥8)"
    )
    assert report(7, ok, detail)


# --- 8. manifest reproducibility ---------------------------------------------------


def test_criterion_8_reproducibility(tmp_path, report):
    def run(*argv):
        code = main([str(a) for a in argv])
        assert code == 0, argv
        return code

    w = tmp_path / "orig"
    run("simulate", "--seed", 7, "--out", w / "sim")
    run("indices", "--inventory", w / "sim" / "inventory.json", "--events", w / "sim" / "events.jsonl",
        "--out", w / "indices.csv")
    run("dataset", "--seed", 3, "--samples", 300, "--out", w / "all.csv", "--train-count", 250,
        "--train-out", w / "train.csv", "--test-out", w / "test.csv")
    run("dataset", "--inventory", w / "sim" / "inventory.json", "--events", w / "sim" / "events.jsonl",
        "--out", w / "file.csv")
    run("train", "--data", w / "train.csv", "--out", w / "model.json", "--seed", 2, "--pop", 10,
        "--generations", 5, "--epochs", 5, "--threads", 2)
    run("train", "--data", w / "train.csv", "--out", w / "bp.json", "--seed", 2, "--epochs", 5, "--no-ga")
    run("evaluate", "--model", w / "model.json", "--data", w / "test.csv", "--out", w / "eval.csv")
    run("predict", "--model", w / "model.json", "--input", w / "test.csv", "--out", w / "pred.txt")
    run("regimes", "--out", w / "regimes")

    checked, mismatched = 0, []
    for k, manifest in enumerate(sorted(w.rglob("*manifest.json"))):
        doc = json.loads(manifest.read_text())
        out_dir = tmp_path / "rerun" / str(k)
        run("rerun", manifest, "--out-dir", out_dir)
        for original in map(type(w), doc["outputs"]):
            replayed = out_dir / original.name
            checked += 1
            if replayed.read_bytes() != original.read_bytes():
                mismatched.append(str(original.relative_to(w)))
    threaded = tmp_path / "threads4.json"
    run("train", "--data", w / "train.csv", "--out", threaded, "--seed", 2, "--pop", 10,
        "--generations", 5, "--epochs", 5, "--threads", 4)
    threads_ok = threaded.read_bytes() == (w / "model.json").read_bytes()
    ok = not mismatched and checked >= 15 and threads_ok
    detail = (
        f"{checked - len(mismatched)}/{checked} artifacts byte-identical on rerun from manifest; "
        f"--threads 2 vs 4 model identical={threads_ok} {mismatched or ''}"
    )
    assert report(8, ok, detail)
