"""Run configuration: database, transaction catalog, topology, links, workload.

Configs are TOML documents.  Every key is optional; omitted sections fall back
to the mobile-banking database (accounts 101-103) and its Deposit / Withdraw /
Enquiry catalog.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

from .coordinator import Strategy
from .model import TransactionType, TxnParams
from .store import Relation

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class InvalidSpec(ValueError):
    pass


BANKING_SCHEMA = ("Account_no", "Amount")
BANKING_ROWS = ((101, 10000), (102, 12300), (103, 11500))


def banking_relations() -> list[Relation]:
    return [Relation.from_rows("Account", BANKING_SCHEMA, BANKING_ROWS)]


def banking_catalog() -> list[TransactionType]:
    return [
        TransactionType("T1", "Deposit", "Account", ("Account_no", "Amount")),
        TransactionType("T2", "Withdraw", "Account", ("Account_no", "Amount")),
        TransactionType("T3", "Enquiry", "Account", ("Amount",)),
    ]


def generated_accounts(count: int, balance: int, first: int = 1) -> list[Relation]:
    rows = [(first + i, balance) for i in range(count)]
    return [Relation.from_rows("Account", BANKING_SCHEMA, rows)]


@dataclass
class LinkParams:
    up_latency_ms: int = 50
    down_latency_ms: int = 20
    up_bytes_per_ms: float = 1
    down_bytes_per_ms: float = 8


@dataclass
class BackboneParams:
    latency_ms: int = 5
    bytes_per_ms: float = 100


@dataclass
class HostOverride:
    site: int
    cell: Optional[int] = None
    compute_delay_ms: Optional[int] = None
    outages: list[tuple[int, int]] = field(default_factory=list)
    moves: list[tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True)
class WorkloadArrival:
    time: int
    site: int
    txn_type_id: str
    params: TxnParams


@dataclass
class WorkloadSpec:
    name: str = "custom"
    seed: int = 0
    strategy: Strategy = Strategy.MULTICAST_RESTART
    restart_cap: Optional[int] = None
    broadcast_period_ms: int = 2000
    backward_validation: bool = True

    relations: list[Relation] = field(default_factory=banking_relations)
    catalog: list[TransactionType] = field(default_factory=banking_catalog)

    hosts: int = 8
    cells: int = 1
    # a fixed delay, or an inclusive [lo, hi] range drawn per host
    compute_delay_ms: Union[int, tuple[int, int]] = 1000
    link: LinkParams = field(default_factory=LinkParams)
    backbone: BackboneParams = field(default_factory=BackboneParams)
    host_overrides: list[HostOverride] = field(default_factory=list)

    mix: dict[str, float] = field(default_factory=lambda: {"T1": 1.0, "T2": 1.0, "T3": 1.0})
    row_distribution: str = "uniform"
    hot_keys: int = 1
    skew: float = 0.8
    mean_interarrival_ms: float = 500
    duration_ms: int = 10000
    max_amount: int = 1000
    disconnects_per_host: int = 0
    disconnect_mean_ms: int = 3000
    moves_per_host: int = 0
    # explicit arrivals replace the generated workload
    script: Optional[list[WorkloadArrival]] = None

    def __post_init__(self):
        self.strategy = Strategy.parse(self.strategy)
        if isinstance(self.compute_delay_ms, list):
            self.compute_delay_ms = tuple(self.compute_delay_ms)

    def with_(self, **changes) -> "WorkloadSpec":
        return replace(self, **changes)

    def validate(self) -> None:
        if self.hosts < 1:
            raise InvalidSpec("at least one host is required")
        if self.cells < 1:
            raise InvalidSpec("at least one cell is required")
        ids = {t.txn_type_id for t in self.catalog}
        if self.script is None:
            if any(w < 0 for w in self.mix.values()) or not any(w > 0 for w in self.mix.values()):
                raise InvalidSpec("transaction mix needs non-negative weights, at least one positive")
            unknown = set(self.mix) - ids
            if unknown:
                raise InvalidSpec(f"mix names unknown transaction types {sorted(unknown)}")
            if self.row_distribution not in ("uniform", "hotspot"):
                raise InvalidSpec(f"row distribution {self.row_distribution!r}")
            if not 0 <= self.skew <= 1:
                raise InvalidSpec("skew must lie in [0, 1]")
            if self.hot_keys < 1:
                raise InvalidSpec("hot_keys must be positive")
            if self.mean_interarrival_ms <= 0:
                raise InvalidSpec("mean inter-arrival must be positive")
        else:
            for a in self.script:
                if a.txn_type_id not in ids:
                    raise InvalidSpec(f"scripted arrival uses unknown type {a.txn_type_id}")
                if not 1 <= a.site <= self.hosts:
                    raise InvalidSpec(f"scripted arrival for unknown host M{a.site}")
        if self.strategy is Strategy.BROADCAST_INVALIDATE and self.broadcast_period_ms <= 0:
            raise InvalidSpec("broadcast period must be positive")
        if self.restart_cap is not None and self.restart_cap < 0:
            raise InvalidSpec("restart cap must be non-negative")


def _pairs(value) -> list[tuple[int, int]]:
    return [(int(a), int(b)) for a, b in (value or [])]


def spec_from_dict(doc: dict[str, Any]) -> WorkloadSpec:
    spec = WorkloadSpec()
    if "name" in doc:
        spec.name = str(doc["name"])
    spec.seed = int(doc.get("seed", spec.seed))
    spec.strategy = Strategy.parse(doc.get("strategy", spec.strategy))
    cap = doc.get("restart_cap")
    spec.restart_cap = None if cap is None or cap == "unlimited" else int(cap)
    spec.broadcast_period_ms = int(doc.get("broadcast_period_ms", spec.broadcast_period_ms))
    # fault injection only: lets a test prove the verifier catches lost updates
    spec.backward_validation = bool(doc.get("backward_validation", True))

    if "relations" in doc:
        spec.relations = [
            Relation.from_rows(r["name"], r["schema"], r.get("rows", [])) for r in doc["relations"]
        ]
    elif "accounts" in doc:
        acc = doc["accounts"]
        spec.relations = generated_accounts(int(acc.get("count", 10)), int(acc.get("balance", 10000)),
                                            int(acc.get("first", 1)))
    if "transactions" in doc:
        spec.catalog = [
            TransactionType(t["id"], t["name"], t["relation"], tuple(t["items"])) for t in doc["transactions"]
        ]

    topo = doc.get("topology", {})
    spec.hosts = int(topo.get("hosts", spec.hosts))
    spec.cells = int(topo.get("cells", spec.cells))
    cd = topo.get("compute_delay_ms", spec.compute_delay_ms)
    spec.compute_delay_ms = tuple(int(x) for x in cd) if isinstance(cd, (list, tuple)) else int(cd)

    if "links" in doc:
        spec.link = LinkParams(**doc["links"])
    if "backbone" in doc:
        spec.backbone = BackboneParams(**doc["backbone"])

    for h in doc.get("hosts", []):
        spec.host_overrides.append(HostOverride(
            site=int(h["site"]),
            cell=h.get("cell"),
            compute_delay_ms=h.get("compute_delay_ms"),
            outages=_pairs(h.get("outages")),
            moves=_pairs(h.get("moves")),
        ))

    wl = doc.get("workload", {})
    if "mix" in wl:
        spec.mix = {k: float(v) for k, v in wl["mix"].items()}
    spec.row_distribution = wl.get("rows", spec.row_distribution)
    spec.hot_keys = int(wl.get("hot_keys", spec.hot_keys))
    spec.skew = float(wl.get("skew", spec.skew))
    spec.mean_interarrival_ms = float(wl.get("mean_interarrival_ms", spec.mean_interarrival_ms))
    spec.duration_ms = int(wl.get("duration_ms", spec.duration_ms))
    spec.max_amount = int(wl.get("max_amount", spec.max_amount))
    spec.disconnects_per_host = int(wl.get("disconnects_per_host", spec.disconnects_per_host))
    spec.disconnect_mean_ms = int(wl.get("disconnect_mean_ms", spec.disconnect_mean_ms))
    spec.moves_per_host = int(wl.get("moves_per_host", spec.moves_per_host))

    if "arrivals" in doc:
        spec.script = [
            WorkloadArrival(int(a["time"]), int(a["site"]), a["txn"], TxnParams(a["row"], int(a.get("amount", 0))))
            for a in doc["arrivals"]
        ]
    spec.validate()
    return spec


def load_config(path: Union[str, Path]) -> WorkloadSpec:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    spec = spec_from_dict(doc)
    if "name" not in doc:
        spec.name = Path(path).stem
    return spec
