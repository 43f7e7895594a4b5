"""Independent reference computations used as test oracles.

These deliberately work from raw events with plain loops and no shared code
with the library, so agreement is meaningful.
"""

import math


def naive_situation(hosts, events, window_index, dt, eta_min=1.0, eta_max=2.0):
    """Threat index of one window straight from raw events.

    hosts: list of (host_id, hi, degradation, [(service_id, si), ...])
    events: list of (t, host_id, service_id, attack_type, severity)
    Returns (per-service R_s dict, per-host TR dict, per-host R_H dict, R_L).
    """
    picked = [e for e in events if math.floor(e[0] / dt) == window_index]
    rs, tr, rh = {}, {}, {}
    for host_id, hi, deg, services in hosts:
        si_total = sum(si for _, si in services)
        acc = 0.0
        for service_id, si in services:
            by_type = {}
            for t, h, s, kind, sev in picked:
                if h == host_id and s == service_id:
                    c, d = by_type.get(kind, (0, 1.0))
                    by_type[kind] = (c + 1, max(d, sev))
            r = 0.0
            for c, d in by_type.values():
                r += c * 100 ** (d - 1)
            rs[(host_id, service_id)] = r
            acc += (si / si_total) * r
        tr[host_id] = acc
        rh[host_id] = (eta_min + deg * (eta_max - eta_min)) * acc
    hi_total = sum(h[1] for h in hosts)
    rl = 0.0
    for host_id, hi, _, _ in hosts:
        rl += (hi / hi_total) * rh[host_id]
    return rs, tr, rh, rl


def rel_close(a, b, tol):
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)
