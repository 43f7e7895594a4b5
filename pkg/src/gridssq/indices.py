"""Element indices: service reliability, host vulnerability, network threat.

Per window and service the reliability index is ``sum_i C_i * 100**(D_i - 1)``
over attack types. A host's vulnerability index is the SI-weighted average of
its services' reliability indices; the host's corrected index multiplies that
by a performance correction factor, and the network threat index is the
HI-weighted average of the corrected host indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .domain import (
    AttackTally,
    AttackWindow,
    NetworkInventory,
    SituationRecord,
    check_tally,
)
from .errors import (
    ConfigInvalid,
    DegradationOutOfRange,
    EmptyInput,
    LengthMismatch,
    NonPositiveEntry,
    NonPositiveEta,
    UnknownEntity,
    WeightsNotNormalized,
)

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class CorrectionPolicy:
    eta_min: float = 1.0
    eta_max: float = 2.0

    def __post_init__(self) -> None:
        if not 0 < self.eta_min <= self.eta_max:
            raise ConfigInvalid(
                f"correction policy needs 0 < eta_min <= eta_max, got [{self.eta_min}, {self.eta_max}]"
            )


def normalize_importance(raw: Sequence[float]) -> list[float]:
    if len(raw) == 0:
        raise EmptyInput("importance list is empty")
    for i, r in enumerate(raw):
        if not (r > 0 and math.isfinite(r)):
            raise NonPositiveEntry(f"importance[{i}] = {r} must be > 0")
    total = math.fsum(raw)
    return [r / total for r in raw]


def reliability_index(entry: Mapping[str, AttackTally]) -> float:
    total = 0.0
    for tally in entry.values():
        check_tally(tally)
        total += tally.count * 100.0 ** (tally.severity - 1.0)
    return total


def _weighted_sum(weights: Sequence[float], values: Sequence[float], what: str) -> float:
    if len(weights) != len(values):
        raise LengthMismatch(f"{len(weights)} weights vs {len(values)} {what}")
    if len(weights) == 0:
        raise EmptyInput(f"no {what}")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOL:
        raise WeightsNotNormalized(f"weights sum to {math.fsum(weights)!r}")
    if any(v < 0 for v in values):
        raise NonPositiveEntry(f"negative {what} in {list(values)}")
    return math.fsum(w * v for w, v in zip(weights, values))


def vulnerability_index(service_weights: Sequence[float], service_indices: Sequence[float]) -> float:
    return _weighted_sum(service_weights, service_indices, "service indices")


def correction_factor(perf_degradation: float, policy: CorrectionPolicy = CorrectionPolicy()) -> float:
    """Affine map of degradation in [0, 1] onto [eta_min, eta_max]."""
    if not 0.0 <= perf_degradation <= 1.0:
        raise DegradationOutOfRange(f"degradation {perf_degradation} outside [0, 1]")
    return policy.eta_min + perf_degradation * (policy.eta_max - policy.eta_min)


def corrected_host_index(vulnerability: float, eta: float) -> float:
    if not eta > 0:
        raise NonPositiveEta(f"eta {eta} must be > 0")
    if vulnerability < 0:
        raise NonPositiveEntry(f"vulnerability index {vulnerability} < 0")
    return eta * vulnerability


def threat_index(host_weights: Sequence[float], corrected: Sequence[float]) -> float:
    return _weighted_sum(host_weights, corrected, "host indices")


def compute_situation(
    inv: NetworkInventory,
    window: AttackWindow,
    policy: CorrectionPolicy = CorrectionPolicy(),
) -> SituationRecord:
    for host_id, service_id in window.entries:
        if not inv.has_service(host_id, service_id):
            raise UnknownEntity(f"window {window.window_index}: unknown service {host_id}/{service_id}")

    service_rel: dict[tuple[str, str], float] = {}
    host_vuln: dict[str, float] = {}
    host_corr: dict[str, float] = {}
    for host in inv.hosts:
        weights = normalize_importance([s.si for s in host.services])
        rel = []
        for svc in host.services:
            key = (host.host_id, svc.service_id)
            r = reliability_index(window.entries.get(key, {}))
            service_rel[key] = r
            rel.append(r)
        tr = vulnerability_index(weights, rel)
        host_vuln[host.host_id] = tr
        host_corr[host.host_id] = corrected_host_index(
            tr, correction_factor(host.perf_degradation, policy)
        )

    host_weights = normalize_importance([h.hi for h in inv.hosts])
    threat = threat_index(host_weights, list(host_corr.values()))
    return SituationRecord(window.window_index, service_rel, host_vuln, host_corr, threat)


def situation_header(inv: NetworkInventory) -> list[str]:
    cols = ["window_index", "R_L"]
    for host in inv.hosts:
        cols += [f"TR[{host.host_id}]", f"RH[{host.host_id}]"]
    for host in inv.hosts:
        cols += [f"RS[{host.host_id}/{s.service_id}]" for s in host.services]
    return cols


def situation_row(inv: NetworkInventory, rec: SituationRecord) -> list[float | int]:
    row: list[float | int] = [rec.window_index, rec.network_threat]
    for host in inv.hosts:
        row += [rec.host_vulnerability[host.host_id], rec.host_corrected[host.host_id]]
    for host in inv.hosts:
        row += [rec.service_reliability[(host.host_id, s.service_id)] for s in host.services]
    return row
