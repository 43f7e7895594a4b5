"""Seeded attack-scenario generator and labeled dataset builder.

Scenarios are synthetic: a random inventory plus Poisson attack counts per
window, host, service and attack type. Labels are the network threat index
computed from the noise-free events; only the feature vectors get noise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .domain import (
    AttackEvent,
    AttackWindow,
    HostSpec,
    NetworkInventory,
    ServiceSpec,
    parse_event_lines,
    validate_inventory,
    window_events,
)
from .errors import ConfigInvalid, CountExceedsDataset, DatasetInvalid, IoError, ParseError
from .indices import CorrectionPolicy, compute_situation
from .neural import NormalizationMeta

FEATURE_NAMES = ("f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8")
N_FEATURES = len(FEATURE_NAMES)

TARGETING_MODES = ("uniform", "high_si", "low_si")

# stream tags for SeedSequence([seed, tag, ...])
_INVENTORY_STREAM = 0
_EVENT_STREAM = 1
_NOISE_STREAM = 2
_SPLIT_STREAM = 3


class AttackProfile(NamedTuple):
    severity: float
    base_rate: float


# Severities are on a [1, 3] scale; rates are expected alerts per window per
# targeted service (a DoS flood raises many alerts). Not measured data.
DEFAULT_CATALOG: Mapping[str, AttackProfile] = {
    "server_scan": AttackProfile(1.0, 3.0),
    "ping_of_death": AttackProfile(1.8, 4.0),
    "dos": AttackProfile(2.5, 25.0),
}


def validate_catalog(catalog: Mapping[str, AttackProfile]) -> None:
    if not catalog:
        raise ConfigInvalid("attack catalog is empty")
    for name, prof in catalog.items():
        if not prof.severity >= 1.0:
            raise ConfigInvalid(f"attack {name!r}: severity {prof.severity} < 1")
        if not prof.base_rate >= 0.0:
            raise ConfigInvalid(f"attack {name!r}: base_rate {prof.base_rate} < 0")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    hosts: int = 4
    services_per_host: int = 3
    periods: int = 10
    dt: float = 60.0
    catalog: Mapping[str, AttackProfile] = field(default_factory=lambda: dict(DEFAULT_CATALOG))
    intensity: float = 1.0
    wave_spread: float = 1.0
    feature_noise_sigma: float = 0.0
    targeting: str = "uniform"
    degradation_range: tuple[float, float] = (0.0, 0.5)
    importance_range: tuple[float, float] = (1.0, 5.0)

    def validate(self) -> "ScenarioConfig":
        problems = []
        if self.seed < 0:
            problems.append(f"seed {self.seed} < 0")
        if self.hosts < 1:
            problems.append(f"hosts {self.hosts} < 1")
        if self.services_per_host < 1:
            problems.append(f"services_per_host {self.services_per_host} < 1")
        if self.periods < 1:
            problems.append(f"periods {self.periods} < 1")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            problems.append(f"dt {self.dt} must be > 0")
        if not self.intensity >= 0:
            problems.append(f"intensity {self.intensity} < 0")
        if not 0.0 <= self.wave_spread <= 1.0:
            problems.append(f"wave_spread {self.wave_spread} outside [0, 1]")
        if not self.feature_noise_sigma >= 0:
            problems.append(f"feature_noise_sigma {self.feature_noise_sigma} < 0")
        if self.targeting not in TARGETING_MODES:
            problems.append(f"targeting {self.targeting!r} not in {TARGETING_MODES}")
        lo, hi = self.degradation_range
        if not 0.0 <= lo <= hi <= 1.0:
            problems.append(f"degradation_range {self.degradation_range} not inside [0, 1]")
        lo, hi = self.importance_range
        if not 0.0 < lo <= hi:
            problems.append(f"importance_range {self.importance_range} must be positive and ordered")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        validate_catalog(self.catalog)
        return self

    @property
    def horizon(self) -> float:
        return self.periods * self.dt


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def poisson(rng: np.random.Generator, lam: float) -> int:
    """Inverse-transform Poisson draw from a single uniform variate."""
    u = rng.random()
    if lam <= 0:
        return 0
    k = 0
    p = math.exp(-lam)
    cdf = p
    # the tail mass below 1e-16 is lost to rounding; stop there
    while u > cdf and p > 0:
        k += 1
        p *= lam / k
        cdf += p
    return k


def generate_inventory(cfg: ScenarioConfig) -> NetworkInventory:
    rng = _stream(cfg.seed, _INVENTORY_STREAM)
    imp_lo, imp_hi = cfg.importance_range
    deg_lo, deg_hi = cfg.degradation_range
    hosts = []
    for h in range(cfg.hosts):
        hi = float(rng.uniform(imp_lo, imp_hi))
        degradation = float(rng.uniform(deg_lo, deg_hi))
        services = tuple(
            ServiceSpec(f"s{j}", float(rng.uniform(imp_lo, imp_hi)))
            for j in range(cfg.services_per_host)
        )
        hosts.append(HostSpec(f"h{h}", hi, degradation, services))
    return validate_inventory(NetworkInventory(tuple(hosts)))


def generate_events(cfg: ScenarioConfig, inv: NetworkInventory, stream: int = 0) -> list[AttackEvent]:
    """Attack events for one scenario run over ``inv``.

    ``stream`` selects an independent event sequence for the same inventory.
    In ``uniform`` targeting every service is attacked independently; the
    focused modes send a host's whole attack volume to its highest- or
    lowest-importance service. Both focused modes consume the random stream
    identically, so they see the same counts and timestamps.
    """
    rng = _stream(cfg.seed, _EVENT_STREAM, stream)
    events: list[AttackEvent] = []
    attack_types = sorted(cfg.catalog)
    for w in range(cfg.periods):
        start = w * cfg.dt
        end = start + cfg.dt
        wave = 1.0 + cfg.wave_spread * (2.0 * rng.random() - 1.0)
        for host in inv.hosts:
            if cfg.targeting == "uniform":
                targets = [(svc.service_id, 1.0) for svc in host.services]
            else:
                pick = max if cfg.targeting == "high_si" else min
                svc = pick(host.services, key=lambda s: s.si)
                targets = [(svc.service_id, float(len(host.services)))]
            for service_id, scale in targets:
                for attack in attack_types:
                    prof = cfg.catalog[attack]
                    count = poisson(rng, prof.base_rate * cfg.intensity * wave * scale)
                    for _ in range(count):
                        t = start + rng.random() * cfg.dt
                        if t >= end:
                            t = math.nextafter(end, start)
                        events.append(AttackEvent(t, host.host_id, service_id, attack, prof.severity))
    events.sort(key=lambda e: e.timestamp)
    return events


def generate_scenario(cfg: ScenarioConfig) -> tuple[NetworkInventory, list[AttackEvent]]:
    cfg.validate()
    inv = generate_inventory(cfg)
    return inv, generate_events(cfg, inv)


def extract_features(
    inv: NetworkInventory,
    window: AttackWindow,
    policy: CorrectionPolicy = CorrectionPolicy(),
    record=None,
) -> np.ndarray:
    """The 8 model inputs for one window.

    f1 total attack count, f2 distinct attack types, f3 max severity,
    f4 count-weighted mean severity, f5 mean reliability index over attacked
    services, f6 max reliability index, f7 mean host vulnerability index,
    f8 max corrected host index. Severity and reliability terms are 0 for an
    empty window.
    """
    if record is None:
        record = compute_situation(inv, window, policy)
    tallies = [t for per_type in window.entries.values() for t in per_type.values()]
    total = sum(t.count for t in tallies)
    types = {name for per_type in window.entries.values() for name in per_type}
    if total:
        max_sev = max(t.severity for t in tallies)
        mean_sev = math.fsum(t.count * t.severity for t in tallies) / total
    else:
        max_sev = mean_sev = 0.0
    attacked = [record.service_reliability[key] for key in window.entries]
    mean_rel = math.fsum(attacked) / len(attacked) if attacked else 0.0
    max_rel = max(record.service_reliability.values())
    vuln = list(record.host_vulnerability.values())
    return np.array(
        [
            float(total),
            float(len(types)),
            max_sev,
            mean_sev,
            mean_rel,
            max_rel,
            math.fsum(vuln) / len(vuln),
            max(record.host_corrected.values()),
        ]
    )


@dataclass(frozen=True)
class LabeledSample:
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class LabeledDataset:
    """Raw feature rows, min-max normalized labels and the ranges used."""

    x: np.ndarray  # (N, 8)
    y: np.ndarray  # (N, 1), normalized to [0, 1]
    meta: NormalizationMeta

    def __len__(self) -> int:
        return self.x.shape[0]

    def __iter__(self) -> Iterator[LabeledSample]:
        for xi, yi in zip(self.x, self.y):
            yield LabeledSample(xi, yi)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.x[idx], self.y[idx], self.meta)

    @property
    def raw_labels(self) -> np.ndarray:
        return self.meta.y_min + self.y * (self.meta.y_max - self.meta.y_min)


def window_samples(
    inv: NetworkInventory,
    events: Sequence[AttackEvent],
    cfg: ScenarioConfig,
    policy: CorrectionPolicy,
    noise_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature rows (noise added if ``noise_rng``) and raw threat labels per window."""
    windows = window_events(events, cfg.dt, cfg.horizon, inv)
    xs, ys = [], []
    for w in windows:
        rec = compute_situation(inv, w, policy)
        xs.append(extract_features(inv, w, policy, rec))
        ys.append(rec.network_threat)
    x = np.array(xs, dtype=float).reshape(-1, N_FEATURES)
    if noise_rng is not None and cfg.feature_noise_sigma > 0:
        x = x + noise_rng.normal(0.0, cfg.feature_noise_sigma, x.shape)
    return x, np.array(ys, dtype=float).reshape(-1, 1)


def _finalize(x: np.ndarray, y_raw: np.ndarray) -> LabeledDataset:
    meta = NormalizationMeta.fit(x, y_raw)
    span = meta.y_max - meta.y_min
    y = np.where(span == 0, 0.5, (y_raw - meta.y_min) / np.where(span == 0, 1.0, span))
    return LabeledDataset(x, y, meta)


def build_dataset(
    inv: NetworkInventory,
    events: Sequence[AttackEvent],
    cfg: ScenarioConfig,
    policy: CorrectionPolicy = CorrectionPolicy(),
) -> LabeledDataset:
    """One sample per window of a single event stream."""
    cfg.validate()
    noise = _stream(cfg.seed, _NOISE_STREAM, 0)
    x, y = window_samples(inv, events, cfg, policy, noise)
    return _finalize(x, y)


def synthesize_dataset(
    cfg: ScenarioConfig,
    count: int,
    policy: CorrectionPolicy = CorrectionPolicy(),
) -> tuple[NetworkInventory, LabeledDataset]:
    """Exactly ``count`` samples from repeated runs over one inventory.

    Run ``k`` uses event stream ``k`` and noise stream ``k`` of ``cfg.seed``;
    runs are appended until ``count`` windows exist, then truncated.
    """
    cfg.validate()
    if count < 1:
        raise ConfigInvalid(f"sample count {count} < 1")
    inv = generate_inventory(cfg)
    xs, ys = [], []
    have = 0
    k = 0
    while have < count:
        events = generate_events(cfg, inv, k)
        x, y = window_samples(inv, events, cfg, policy, _stream(cfg.seed, _NOISE_STREAM, k))
        xs.append(x)
        ys.append(y)
        have += x.shape[0]
        k += 1
    x = np.concatenate(xs)[:count]
    y = np.concatenate(ys)[:count]
    return inv, _finalize(x, y)


def split_dataset(ds: LabeledDataset, train_count: int, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    if not 0 <= train_count <= len(ds):
        raise CountExceedsDataset(f"train_count {train_count} vs {len(ds)} samples")
    order = _stream(seed, _SPLIT_STREAM).permutation(len(ds))
    return ds.subset(np.sort(order[:train_count])), ds.subset(np.sort(order[train_count:]))


def parse_event_log(path) -> list[AttackEvent]:
    try:
        with open(path) as fh:
            return parse_event_lines(fh, path)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def regime_scenarios() -> dict[str, ScenarioConfig]:
    """Two contrasting regimes on the same base inventory and attack volume.

    ``correlated``: attacks land on each host's most important service and
    hosts are heavily degraded. ``resilient``: the same attack volume lands on
    each host's least important service and hosts are healthy.
    """
    base = ScenarioConfig(seed=2022, hosts=4, services_per_host=3, importance_range=(1.0, 5.0))
    return {
        "correlated": replace(base, targeting="high_si", degradation_range=(0.5, 1.0)),
        "resilient": replace(base, targeting="low_si", degradation_range=(0.0, 0.1)),
    }


# --- dataset files ----------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def save_dataset(ds: LabeledDataset, path) -> Path:
    """Write ``f1..f8,y`` CSV plus a ``.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*FEATURE_NAMES, "y"])
        for xi, yi in zip(ds.x, ds.y):
            writer.writerow([*(_fmt(v) for v in xi), _fmt(yi[0])])
    sidecar = meta_path(path)
    sidecar.write_text(json.dumps(ds.meta.to_dict(), indent=1) + "\n")
    return sidecar


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        meta_doc = json.loads(meta_path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read dataset {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid metadata JSON: {exc}", meta_path(path)) from exc
    if not rows or rows[0] != [*FEATURE_NAMES, "y"]:
        raise DatasetInvalid(f"{path}: header must be {','.join(FEATURE_NAMES)},y")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DatasetInvalid(f"{path}: non-numeric value: {exc}") from exc
    if data.size == 0:
        raise DatasetInvalid(f"{path}: no samples")
    if data.ndim != 2 or data.shape[1] != N_FEATURES + 1 or not np.all(np.isfinite(data)):
        raise DatasetInvalid(f"{path}: every row needs {N_FEATURES + 1} finite values")
    try:
        meta = NormalizationMeta.from_dict(meta_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetInvalid(f"{meta_path(path)}: bad metadata: {exc}") from exc
    return LabeledDataset(data[:, :N_FEATURES], data[:, N_FEATURES:], meta)
