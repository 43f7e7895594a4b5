"""Command-line pipeline: simulate -> indices -> dataset -> train -> evaluate -> predict.

Every artifact gets a ``*.manifest.json`` sidecar holding the fully resolved
arguments; ``gridssq rerun MANIFEST --out-dir DIR`` replays it.

Exit codes: 0 success, 2 configuration/validation, 3 parse/data, 4 internal.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .domain import (
    inventory_to_dict,
    load_inventory,
    save_events,
    window_events,
)
from .errors import ConfigInvalid, GridSsqError, IoError, ParseError, SchemaMismatch
from .evolution import BpConfig, Dims, GaConfig, plain_train, run_hybrid
from .indices import CorrectionPolicy, compute_situation, situation_header, situation_row
from .neural import (
    Dataset,
    NormalizationMeta,
    load_model,
    loss,
    model_to_dict,
    normalize_features,
    predict,
    predict_raw,
)
from .simulator import (
    FEATURE_NAMES,
    ScenarioConfig,
    build_dataset,
    generate_scenario,
    load_dataset,
    meta_path,
    parse_event_log,
    regime_scenarios,
    save_dataset,
    split_dataset,
    synthesize_dataset,
)

# argument names holding output paths, per command (used by ``rerun``)
OUTPUT_KEYS = {
    "simulate": ("out",),
    "indices": ("out",),
    "dataset": ("out", "train_out", "test_out"),
    "train": ("out", "history"),
    "evaluate": ("out",),
    "predict": ("out",),
    "regimes": ("out",),
}
INPUT_KEYS = ("inventory", "events", "data", "model", "input")


# --- file helpers -------------------------------------------------------------


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def manifest_file(artifact) -> Path:
    artifact = Path(artifact)
    if artifact.is_dir():
        return artifact / "manifest.json"
    return artifact.with_name(artifact.name + ".manifest.json")


def write_manifest(args: argparse.Namespace, artifact, outputs: list, started: float, extra=None) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": args.command,
        "config": config,
        "seeds": {k: v for k, v in config.items() if "seed" in k},
        "inputs": {k: config[k] for k in INPUT_KEYS if config.get(k) is not None},
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    if extra:
        doc["results"] = extra
    write_atomic(manifest_file(artifact), json.dumps(doc, indent=2) + "\n")


def _abs(path):
    return None if path is None else str(Path(path).resolve())


def _policy(args) -> CorrectionPolicy:
    return CorrectionPolicy(args.eta_min, args.eta_max)


# --- commands -----------------------------------------------------------------


def _scenario_from_args(args, noise: float = 0.0) -> ScenarioConfig:
    return ScenarioConfig(
        seed=args.seed,
        hosts=args.hosts,
        services_per_host=args.services,
        periods=args.periods,
        dt=args.dt,
        intensity=args.intensity,
        wave_spread=args.wave_spread,
        feature_noise_sigma=noise,
    ).validate()


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = _scenario_from_args(args)
    inv, events = generate_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "inventory.json", json.dumps(inventory_to_dict(inv), indent=2) + "\n")
    buf = out / ".events.jsonl.tmp"
    save_events(events, buf)
    os.replace(buf, out / "events.jsonl")
    write_manifest(args, out, [out / "inventory.json", out / "events.jsonl"], started,
                   {"events": len(events), "horizon_s": cfg.horizon})
    print(f"{len(events)} events over {cfg.periods} windows -> {out}")
    return 0


def _situation_csv(inv, events, dt: float, horizon: float, policy) -> tuple[str, list]:
    windows = window_events(events, dt, horizon, inv)
    records = [compute_situation(inv, w, policy) for w in windows]
    return csv_text(situation_header(inv), (situation_row(inv, r) for r in records)), records


def cmd_indices(args) -> int:
    started = time.perf_counter()
    if not args.dt > 0 or args.periods < 1:
        raise ConfigInvalid("--dt must be > 0 and --periods >= 1")
    inv = load_inventory(args.inventory)
    events = parse_event_log(args.events)
    text, records = _situation_csv(inv, events, args.dt, args.periods * args.dt, _policy(args))
    write_atomic(args.out, text)
    write_manifest(args, args.out, [args.out], started, {"windows": len(records)})
    print(f"{len(records)} windows -> {args.out}")
    return 0


def cmd_dataset(args) -> int:
    started = time.perf_counter()
    if args.train_count is not None and not (args.train_out and args.test_out):
        raise ConfigInvalid("--train-count needs --train-out and --test-out")
    if args.inventory or args.events:
        if not (args.inventory and args.events):
            raise ConfigInvalid("--inventory and --events must be given together")
        cfg = ScenarioConfig(seed=args.seed, periods=args.periods, dt=args.dt,
                             feature_noise_sigma=args.noise).validate()
        inv = load_inventory(args.inventory)
        ds = build_dataset(inv, parse_event_log(args.events), cfg, _policy(args))
    else:
        cfg = _scenario_from_args(args, args.noise)
        _, ds = synthesize_dataset(cfg, args.samples, _policy(args))
    outputs = [Path(args.out), meta_path(args.out)]
    _save_dataset_atomic(ds, args.out)
    results = {"samples": len(ds)}
    if args.train_count is not None:
        train, test = split_dataset(ds, args.train_count, args.split_seed)
        _save_dataset_atomic(train, args.train_out)
        _save_dataset_atomic(test, args.test_out)
        outputs += [Path(args.train_out), meta_path(args.train_out), Path(args.test_out), meta_path(args.test_out)]
        results.update(train=len(train), test=len(test))
    write_manifest(args, args.out, outputs, started, results)
    print(f"{len(ds)} samples -> {args.out}")
    return 0


def _save_dataset_atomic(ds, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    sidecar = save_dataset(ds, tmp)
    os.replace(tmp, path)
    os.replace(sidecar, meta_path(path))


def _model_space(ds, meta: NormalizationMeta) -> Dataset:
    return Dataset(normalize_features(meta, ds.x), ds.y)


def cmd_train(args) -> int:
    started = time.perf_counter()
    ds = load_dataset(args.data)
    n, m = ds.x.shape[1], ds.y.shape[1]
    meta = NormalizationMeta(ds.x.min(axis=0), ds.x.max(axis=0), ds.meta.y_min, ds.meta.y_max)
    data = _model_space(ds, meta)
    if args.hidden < 1:
        raise ConfigInvalid("--hidden must be >= 1")
    dims = Dims(n, args.hidden, m)
    bp = BpConfig(lr=args.lr, epochs=args.epochs, seed=args.seed, momentum=args.momentum).validate()
    if args.no_ga:
        params = plain_train(data, dims, bp, args.seed, meta)
        history = []
        results = {"mode": "bp"}
    else:
        ga = GaConfig(
            population=args.pop,
            generations=args.generations,
            crossover_prob=args.crossover,
            mutation_prob=args.mutation,
            mutation_sigma=args.sigma,
            elitism_count=args.elitism,
            gene_min=args.gene_min,
            gene_max=args.gene_max,
            seed=args.seed,
            target_fitness=args.target_fitness,
            threads=args.threads,
        ).validate()
        res = run_hybrid(data, dims, ga, bp, meta)
        params, history = res.params, res.history
        results = {"mode": "ga-bp", "ga_fitness": res.ga_fitness, "fine_tune_kept": res.fine_tune_kept}
    results["train_abs_error"] = loss(params, data)
    write_atomic(args.out, json.dumps(model_to_dict(params), indent=1) + "\n")
    write_atomic(
        args.history,
        csv_text(["generation", "best_fitness", "mean_fitness"],
                 ([h.generation, h.best_fitness, h.mean_fitness] for h in history)),
    )
    write_manifest(args, args.out, [args.out, args.history], started, results)
    print(f"train abs error {results['train_abs_error']:.6f} -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    params = load_model(args.model)
    ds = load_dataset(args.data)
    if ds.x.shape[1] != params.n or ds.y.shape[1] != params.m:
        raise SchemaMismatch(
            f"model is {params.n}->{params.m}, dataset is {ds.x.shape[1]}->{ds.y.shape[1]}"
        )
    pred = predict(params, normalize_features(params.norm, ds.x))[:, 0]
    actual = ds.y[:, 0]
    err = pred - actual
    summary = {
        "samples": int(err.shape[0]),
        "mae": float(np.abs(err).mean()),
        "max_abs_error": float(np.abs(err).max()),
        "band": args.band,
        "within_band": float((np.abs(err) <= args.band).mean()),
    }
    write_atomic(args.out, csv_text(["index", "actual", "predicted", "error"],
                                    ([i, a, p, e] for i, (a, p, e) in enumerate(zip(actual, pred, err)))))
    write_manifest(args, args.out, [args.out], started, summary)
    print(
        f"MAE={summary['mae']:.6f} max_abs_error={summary['max_abs_error']:.6f} "
        f"within_{args.band:g}={summary['within_band']:.4f} n={summary['samples']}"
    )
    return 0


def _read_feature_rows(args, n: int) -> np.ndarray:
    rows: list[list[float]] = []
    if args.features:
        for spec in args.features:
            try:
                rows.append([float(v) for v in spec.split(",")])
            except ValueError as exc:
                raise ParseError(f"--features {spec!r}: {exc}") from exc
    if args.input:
        try:
            with open(args.input, newline="") as fh:
                table = list(csv.reader(fh))
        except OSError as exc:
            raise IoError(f"cannot read {args.input}: {exc}") from exc
        if table and not _is_numeric_row(table[0]):
            header = table[0]
            names = list(FEATURE_NAMES[:n])
            if header[:n] != names:
                raise SchemaMismatch(f"{args.input}: header must start with {','.join(names)}")
            body, cols = table[1:], n
        else:
            body, cols = table, None
        for line_no, row in enumerate(body, start=2 if cols else 1):
            try:
                rows.append([float(v) for v in (row[:cols] if cols else row)])
            except ValueError as exc:
                raise ParseError(str(exc), args.input, line_no) from exc
    if not rows:
        raise ConfigInvalid("no feature rows given (use --features or --input)")
    for i, row in enumerate(rows):
        if len(row) != n:
            raise SchemaMismatch(f"row {i + 1}: model expects {n} features, got {len(row)}")
    return np.array(rows, dtype=float)


def _is_numeric_row(row) -> bool:
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True


def cmd_predict(args) -> int:
    started = time.perf_counter()
    params = load_model(args.model)
    x = _read_feature_rows(args, params.n)
    values = predict_raw(params, x)
    text = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in values)
    sys.stdout.write(text)
    if args.out:
        write_atomic(args.out, text)
        write_manifest(args, args.out, [args.out], started, {"rows": int(x.shape[0])})
    return 0


def cmd_regimes(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = _policy(args)
    summary = {}
    outputs = []
    for name, cfg in regime_scenarios().items():
        inv, events = generate_scenario(cfg)
        text, records = _situation_csv(inv, events, cfg.dt, cfg.horizon, policy)
        write_atomic(out / f"{name}.inventory.json", json.dumps(inventory_to_dict(inv), indent=2) + "\n")
        write_atomic(out / f"{name}.indices.csv", text)
        outputs += [out / f"{name}.inventory.json", out / f"{name}.indices.csv"]
        per_window_tr = [np.mean(list(r.host_vulnerability.values())) for r in records]
        summary[name] = {
            "mean_host_vulnerability": float(np.mean(per_window_tr)),
            "mean_network_threat": float(np.mean([r.network_threat for r in records])),
            "nonzero_threat_windows": int(sum(r.network_threat > 0 for r in records)),
            "windows": len(records),
        }
    write_atomic(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    outputs.append(out / "summary.json")
    write_manifest(args, out, outputs, started, summary)
    for name, s in summary.items():
        print(
            f"{name}: mean TR={s['mean_host_vulnerability']:.3f} mean R_L={s['mean_network_threat']:.3f} "
            f"nonzero windows={s['nonzero_threat_windows']}/{s['windows']}"
        )
    return 0


def cmd_rerun(args) -> int:
    try:
        doc = json.loads(Path(args.manifest).read_text())
        command, config = doc["command"], dict(doc["config"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"unreadable manifest: {exc}", args.manifest) from exc
    if command not in COMMANDS:
        raise ConfigInvalid(f"manifest names unknown command {command!r}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        for key in OUTPUT_KEYS[command]:
            if config.get(key):
                config[key] = str(out_dir if command in ("simulate", "regimes") else out_dir / Path(config[key]).name)
    replay = argparse.Namespace(**config)
    return COMMANDS[command](replay)


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "indices": cmd_indices,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "regimes": cmd_regimes,
    "rerun": cmd_rerun,
}


# --- parser -------------------------------------------------------------------


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hosts", type=int, default=4)
    p.add_argument("--services", type=int, default=3, help="services per host")
    p.add_argument("--periods", type=int, default=10, help="number of windows")
    p.add_argument("--dt", type=float, default=60.0, help="window length in seconds")
    p.add_argument("--intensity", type=float, default=1.0)
    p.add_argument("--wave-spread", type=float, default=1.0,
                   help="per-window attack volume multiplier is uniform in [1-s, 1+s]")


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta-min", type=float, default=1.0)
    p.add_argument("--eta-max", type=float, default=2.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridssq", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"gridssq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate an inventory and attack event log", allow_abbrev=False)
    _add_scenario_flags(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("indices", help="per-window element indices as CSV", allow_abbrev=False)
    p.add_argument("--inventory", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--dt", type=float, default=60.0)
    p.add_argument("--periods", type=int, default=10)
    _add_policy_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("dataset", help="labeled feature dataset (synthetic or from files)", allow_abbrev=False)
    _add_scenario_flags(p)
    _add_policy_flags(p)
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--noise", type=float, default=0.02, help="feature noise sigma")
    p.add_argument("--inventory", help="build from this inventory instead of synthesizing")
    p.add_argument("--events", help="event log to pair with --inventory")
    p.add_argument("--train-count", type=int)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--train-out")
    p.add_argument("--test-out")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the GA-BP network (or plain BP with --no-ga)", allow_abbrev=False)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--history", help="per-generation CSV (default: <out>.history.csv)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=9)
    p.add_argument("--pop", type=int, default=40)
    p.add_argument("--generations", type=int, default=50)
    p.add_argument("--crossover", type=float, default=0.8)
    p.add_argument("--mutation", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--elitism", type=int, default=1)
    p.add_argument("--gene-min", type=float, default=-5.0)
    p.add_argument("--gene-max", type=float, default=5.0)
    p.add_argument("--target-fitness", type=float)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--no-ga", action="store_true")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("evaluate", help="per-sample error report on a dataset", allow_abbrev=False)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--band", type=float, default=0.02)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="denormalized threat index per feature row", allow_abbrev=False)
    p.add_argument("--model", required=True)
    p.add_argument("--features", action="append", help="comma-separated feature row (repeatable)")
    p.add_argument("--input", help="CSV of feature rows")
    p.add_argument("--out")

    p = sub.add_parser("regimes", help="correlated vs resilient scenario contrast", allow_abbrev=False)
    _add_policy_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerun", help="replay a manifest", allow_abbrev=False)
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="write artifacts here instead of the recorded paths")
    return parser


def _resolve_paths(args: argparse.Namespace) -> None:
    if args.command == "rerun":
        return
    if args.command == "train" and not args.history:
        args.history = args.out + ".history.csv"
    for key in INPUT_KEYS + OUTPUT_KEYS.get(args.command, ()):
        if getattr(args, key, None) is not None:
            setattr(args, key, _abs(getattr(args, key)))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _resolve_paths(args)
    try:
        return COMMANDS[args.command](args)
    except GridSsqError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return IoError.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
