"""Network inventory, attack events and per-window aggregation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    DegradationOutOfRange,
    DuplicateId,
    EmptyInventory,
    MalformedLine,
    NonPositiveImportance,
    NonPositiveWindow,
    ParseError,
    SeverityBelowOne,
    TimestampOutOfHorizon,
    UnknownEntity,
    UnknownField,
    ZeroCount,
)


@dataclass(frozen=True)
class ServiceSpec:
    service_id: str
    si: float


@dataclass(frozen=True)
class HostSpec:
    host_id: str
    hi: float
    perf_degradation: float
    services: tuple[ServiceSpec, ...]


@dataclass(frozen=True)
class NetworkInventory:
    hosts: tuple[HostSpec, ...]

    def service_keys(self) -> list[tuple[str, str]]:
        """(host_id, service_id) pairs in inventory order."""
        return [(h.host_id, s.service_id) for h in self.hosts for s in h.services]

    def has_service(self, host_id: str, service_id: str) -> bool:
        return (host_id, service_id) in self._key_set

    @cached_property
    def _key_set(self) -> frozenset:
        return frozenset(self.service_keys())


def validate_inventory(inv: NetworkInventory) -> NetworkInventory:
    if not inv.hosts:
        raise EmptyInventory("inventory has no hosts")
    seen_hosts: set[str] = set()
    for host in inv.hosts:
        if host.host_id in seen_hosts:
            raise DuplicateId(host.host_id)
        seen_hosts.add(host.host_id)
        if not (host.hi > 0 and math.isfinite(host.hi)):
            raise NonPositiveImportance(f"host {host.host_id!r}: HI={host.hi}")
        if not 0.0 <= host.perf_degradation <= 1.0:
            raise DegradationOutOfRange(
                f"host {host.host_id!r}: perf_degradation={host.perf_degradation}"
            )
        if not host.services:
            raise EmptyInventory(f"host {host.host_id!r} has no services")
        seen_services: set[str] = set()
        for svc in host.services:
            if svc.service_id in seen_services:
                raise DuplicateId(f"{host.host_id}/{svc.service_id}")
            seen_services.add(svc.service_id)
            if not (svc.si > 0 and math.isfinite(svc.si)):
                raise NonPositiveImportance(
                    f"service {host.host_id}/{svc.service_id}: SI={svc.si}"
                )
    return inv


@dataclass(frozen=True)
class AttackEvent:
    timestamp: float
    host_id: str
    service_id: str
    attack_type: str
    severity: float

    def __post_init__(self) -> None:
        if not self.severity >= 1.0:
            raise SeverityBelowOne(f"severity {self.severity} < 1")
        if not (self.timestamp >= 0.0 and math.isfinite(self.timestamp)):
            raise TimestampOutOfHorizon(f"timestamp {self.timestamp} is negative or not finite")


class AttackTally(NamedTuple):
    """Per-window aggregate for one attack type on one service."""

    count: int
    severity: float


def check_tally(tally: AttackTally) -> None:
    if tally.count < 1:
        raise ZeroCount(f"count {tally.count} < 1")
    if not tally.severity >= 1.0:
        raise SeverityBelowOne(f"severity {tally.severity} < 1")


ServiceKey = tuple[str, str]


@dataclass(frozen=True)
class AttackWindow:
    window_index: int
    window_start: float
    window_length: float
    entries: dict[ServiceKey, dict[str, AttackTally]] = field(default_factory=dict)

    def event_count(self) -> int:
        return sum(t.count for per_type in self.entries.values() for t in per_type.values())


@dataclass(frozen=True)
class SituationRecord:
    window_index: int
    service_reliability: dict[ServiceKey, float]
    host_vulnerability: dict[str, float]
    host_corrected: dict[str, float]
    network_threat: float


def window_count(horizon: float, dt: float) -> int:
    return math.ceil(horizon / dt)


def window_events(
    events: Iterable[AttackEvent],
    dt: float,
    horizon: float,
    inventory: NetworkInventory | None = None,
) -> list[AttackWindow]:
    """Bucket events into half-open windows ``[k*dt, (k+1)*dt)``.

    Per (host, service, attack_type) the tally keeps the event count and the
    maximum severity. When ``inventory`` is given, events naming unknown
    services raise ``UnknownEntity``.
    """
    if not dt > 0:
        raise NonPositiveWindow(f"window length {dt} must be > 0")
    n_windows = window_count(horizon, dt)
    buckets: list[dict[ServiceKey, dict[str, AttackTally]]] = [{} for _ in range(n_windows)]
    known = inventory._key_set if inventory is not None else None
    for ev in events:
        if not 0.0 <= ev.timestamp < horizon:
            raise TimestampOutOfHorizon(f"timestamp {ev.timestamp} outside [0, {horizon})")
        key = (ev.host_id, ev.service_id)
        if known is not None and key not in known:
            raise UnknownEntity(f"unknown service {ev.host_id}/{ev.service_id}")
        k = min(math.floor(ev.timestamp / dt), n_windows - 1)
        per_type = buckets[k].setdefault(key, {})
        prev = per_type.get(ev.attack_type)
        if prev is None:
            per_type[ev.attack_type] = AttackTally(1, ev.severity)
        else:
            per_type[ev.attack_type] = AttackTally(prev.count + 1, max(prev.severity, ev.severity))
    # canonical ordering so output does not depend on input event order
    windows = []
    for k, bucket in enumerate(buckets):
        entries = {
            key: {t: bucket[key][t] for t in sorted(bucket[key])} for key in sorted(bucket)
        }
        windows.append(AttackWindow(k, k * dt, dt, entries))
    return windows


# --- file formats -----------------------------------------------------------

_HOST_FIELDS = {"host_id", "hi", "perf_degradation", "services"}
_SERVICE_FIELDS = {"service_id", "si"}
_EVENT_FIELDS = {"t", "host_id", "service_id", "attack_type", "severity"}


def _check_fields(obj, allowed: set[str], what: str, path=None, line_no=None) -> None:
    if not isinstance(obj, dict):
        raise MalformedLine(f"{what} must be a JSON object", path, line_no)
    extra = set(obj) - allowed
    if extra:
        raise UnknownField(f"{what}: unknown field(s) {sorted(extra)}", path, line_no)
    missing = allowed - set(obj)
    if missing:
        raise MalformedLine(f"{what}: missing field(s) {sorted(missing)}", path, line_no)


def _num(value, what: str, path=None, line_no=None) -> float:
    if isinstance(value, bool):
        raise MalformedLine(f"{what}: expected a number, got {value!r}", path, line_no)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise MalformedLine(f"{what}: expected a number, got {value!r}", path, line_no) from None


def inventory_from_dict(doc) -> NetworkInventory:
    _check_fields(doc, {"hosts"}, "inventory")
    if not isinstance(doc["hosts"], list):
        raise ParseError("inventory: 'hosts' must be a list")
    hosts = []
    for h in doc["hosts"]:
        _check_fields(h, _HOST_FIELDS, "host")
        if not isinstance(h["services"], list):
            raise ParseError(f"host {h['host_id']!r}: 'services' must be a list")
        services = []
        for s in h["services"]:
            _check_fields(s, _SERVICE_FIELDS, "service")
            services.append(ServiceSpec(str(s["service_id"]), _num(s["si"], "si")))
        hosts.append(
            HostSpec(
                str(h["host_id"]),
                _num(h["hi"], "hi"),
                _num(h["perf_degradation"], "perf_degradation"),
                tuple(services),
            )
        )
    return validate_inventory(NetworkInventory(tuple(hosts)))


def inventory_to_dict(inv: NetworkInventory) -> dict:
    return {
        "hosts": [
            {
                "host_id": h.host_id,
                "hi": h.hi,
                "perf_degradation": h.perf_degradation,
                "services": [{"service_id": s.service_id, "si": s.si} for s in h.services],
            }
            for h in inv.hosts
        ]
    }


def load_inventory(path) -> NetworkInventory:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path) from exc
    try:
        return inventory_from_dict(doc)
    except ParseError as exc:
        raise type(exc)(str(exc), path) from exc


def save_inventory(inv: NetworkInventory, path) -> None:
    Path(path).write_text(json.dumps(inventory_to_dict(inv), indent=2) + "\n")


def event_to_dict(ev: AttackEvent) -> dict:
    return {
        "t": ev.timestamp,
        "host_id": ev.host_id,
        "service_id": ev.service_id,
        "attack_type": ev.attack_type,
        "severity": ev.severity,
    }


def event_from_dict(obj, path=None, line_no=None) -> AttackEvent:
    _check_fields(obj, _EVENT_FIELDS, "event", path, line_no)
    t = _num(obj["t"], "t", path, line_no)
    severity = _num(obj["severity"], "severity", path, line_no)
    if not (t >= 0.0 and math.isfinite(t)):
        raise MalformedLine(f"t: {t} is negative or not finite", path, line_no)
    if not severity >= 1.0:
        err = SeverityBelowOne(f"line {line_no}: severity {severity} < 1")
        err.line_no = line_no
        raise err
    return AttackEvent(t, str(obj["host_id"]), str(obj["service_id"]), str(obj["attack_type"]), severity)


def parse_event_lines(lines: Iterable[str], path=None) -> list[AttackEvent]:
    events = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(f"invalid JSON: {exc.msg}", path, line_no) from exc
        events.append(event_from_dict(obj, path, line_no))
    return events


def save_events(events: Sequence[AttackEvent], path) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_dict(ev)) + "\n")
