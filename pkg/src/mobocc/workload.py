"""Seeded workload and host-layout generation.

Each concern draws from its own named ``random.Random`` stream derived from
the spec seed, so e.g. changing the host count does not reshuffle the
transaction mix of an otherwise identical spec more than necessary.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .config import InvalidSpec, WorkloadArrival, WorkloadSpec
from .model import TxnParams


@dataclass
class HostLayout:
    site: int
    cell: int
    compute_delay_ms: int
    outages: list[tuple[int, int]] = field(default_factory=list)
    moves: list[tuple[int, int]] = field(default_factory=list)


def stream(seed: int, name: str) -> random.Random:
    return random.Random(f"{seed}:{name}")


def row_keys(spec: WorkloadSpec, relation: str) -> list:
    for rel in spec.relations:
        if rel.name == relation:
            keys = sorted(rel.rows)
            if not keys:
                raise InvalidSpec(f"relation {relation} has no rows")
            return keys
    raise InvalidSpec(f"no relation named {relation}")


def generate_workload(spec: WorkloadSpec) -> list[WorkloadArrival]:
    spec.validate()
    if spec.script is not None:
        return sorted(spec.script, key=lambda a: (a.time, a.site))
    rng = stream(spec.seed, "arrivals")
    catalog = {t.txn_type_id: t for t in spec.catalog}
    names = sorted(spec.mix)
    weights = [spec.mix[n] for n in names]
    keys = {n: row_keys(spec, catalog[n].relation) for n in names}
    arrivals = []
    t = 0
    while True:
        t += max(1, math.ceil(rng.expovariate(1.0 / spec.mean_interarrival_ms)))
        if t >= spec.duration_ms:
            break
        site = rng.randint(1, spec.hosts)
        txn = rng.choices(names, weights)[0]
        pool = keys[txn]
        if spec.row_distribution == "hotspot" and rng.random() < spec.skew:
            row = rng.choice(pool[: spec.hot_keys])
        else:
            row = rng.choice(pool)
        amount = rng.randint(1, spec.max_amount)
        arrivals.append(WorkloadArrival(t, site, txn, TxnParams(row, amount)))
    return arrivals


def host_layout(spec: WorkloadSpec) -> list[HostLayout]:
    rng = stream(spec.seed, "hosts")
    layout = []
    for site in range(1, spec.hosts + 1):
        if isinstance(spec.compute_delay_ms, tuple):
            lo, hi = spec.compute_delay_ms
            delay = rng.randint(lo, hi)
        else:
            delay = int(spec.compute_delay_ms)
        h = HostLayout(site, (site - 1) % spec.cells + 1, delay)
        for _ in range(spec.disconnects_per_host):
            start = rng.randrange(0, max(1, spec.duration_ms))
            length = max(1, math.ceil(rng.expovariate(1.0 / spec.disconnect_mean_ms)))
            h.outages.append((start, start + length))
        if spec.cells > 1:
            cell = h.cell
            for when in sorted(rng.randrange(1, max(2, spec.duration_ms)) for _ in range(spec.moves_per_host)):
                cell = rng.choice([c for c in range(1, spec.cells + 1) if c != cell])
                h.moves.append((when, cell))
        layout.append(h)
    for o in spec.host_overrides:
        if not 1 <= o.site <= spec.hosts:
            raise InvalidSpec(f"override for unknown host M{o.site}")
        h = layout[o.site - 1]
        if o.cell is not None:
            if not 1 <= o.cell <= spec.cells:
                raise InvalidSpec(f"M{o.site}: no cell {o.cell}")
            h.cell = o.cell
        if o.compute_delay_ms is not None:
            h.compute_delay_ms = int(o.compute_delay_ms)
        h.outages.extend(o.outages)
        h.moves.extend(o.moves)
    for h in layout:
        h.outages.sort()
        h.moves.sort()
        for _, cell in h.moves:
            if not 1 <= cell <= spec.cells:
                raise InvalidSpec(f"M{h.site}: move to unknown cell {cell}")
    return layout
