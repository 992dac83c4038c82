"""Base-station coordinator.

Each base station keeps the Transaction_Info registry and its own Current
Transactions table.  Conflicts are detected when data is requested (and only
reported), and resolved when a commit arrives: the coordinator validates the
commit backward against the database versions, applies it, and pushes the
fresh values to every other in-flight transaction that uses a written item.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .model import (
    AbortNotice,
    BaseStationId,
    CommitAck,
    CommitRequest,
    ConflictNotice,
    DataItemId,
    DataReply,
    DataRequest,
    InvalidationReport,
    SiteId,
    Timestamp,
    TransactionType,
    UpdateReport,
    Withdraw,
    bs_addr,
    host_addr,
    site_of,
)
from .store import Store


class CoordinatorError(Exception):
    pass


class UnknownTransactionType(CoordinatorError):
    pass


class UnknownInstance(CoordinatorError):
    pass


class UnknownBaseStation(CoordinatorError):
    pass


class Strategy(enum.Enum):
    MULTICAST_RESTART = "multicast"
    ABORT_ON_CONFLICT = "abort"
    BROADCAST_INVALIDATE = "broadcast"

    @classmethod
    def parse(cls, name: Union[str, "Strategy"]) -> "Strategy":
        if isinstance(name, Strategy):
            return name
        key = name.strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "multicast": cls.MULTICAST_RESTART,
            "multicastrestart": cls.MULTICAST_RESTART,
            "abort": cls.ABORT_ON_CONFLICT,
            "abortonconflict": cls.ABORT_ON_CONFLICT,
            "broadcast": cls.BROADCAST_INVALIDATE,
            "broadcastinvalidate": cls.BROADCAST_INVALIDATE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown strategy {name!r}") from None

    @property
    def label(self) -> str:
        return {
            Strategy.MULTICAST_RESTART: "MulticastRestart",
            Strategy.ABORT_ON_CONFLICT: "AbortOnConflict",
            Strategy.BROADCAST_INVALIDATE: "BroadcastInvalidate",
        }[self]


class TransactionInfoRegistry:
    def __init__(self, types: Iterable[TransactionType] = ()):
        self.entries: dict[str, TransactionType] = {}
        for t in types:
            self.register(t)

    def register(self, ttype: TransactionType) -> None:
        if ttype.txn_type_id in self.entries:
            raise CoordinatorError(f"duplicate transaction type {ttype.txn_type_id}")
        self.entries[ttype.txn_type_id] = ttype

    def get(self, txn_type_id: str) -> TransactionType:
        try:
            return self.entries[txn_type_id]
        except KeyError:
            raise UnknownTransactionType(txn_type_id) from None

    def __contains__(self, txn_type_id) -> bool:
        return txn_type_id in self.entries

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class CurrentRow:
    site: SiteId
    instance_id: int
    txn_type_id: str
    data_items: frozenset[DataItemId]
    arrival_time: Timestamp


class CurrentTransactionsTable:
    def __init__(self):
        self._rows: dict[int, CurrentRow] = {}

    def upsert(self, row: CurrentRow) -> None:
        self._rows[row.instance_id] = row

    def get(self, instance_id: int) -> Optional[CurrentRow]:
        return self._rows.get(instance_id)

    def remove(self, instance_id: int) -> CurrentRow:
        return self._rows.pop(instance_id)

    def intersecting(self, items: Iterable[DataItemId], exclude: Optional[int] = None) -> list[CurrentRow]:
        wanted = set(items)
        hits = [
            r for r in self._rows.values()
            if r.instance_id != exclude and not wanted.isdisjoint(r.data_items)
        ]
        hits.sort(key=lambda r: (r.arrival_time, r.site, r.instance_id))
        return hits

    def __contains__(self, instance_id) -> bool:
        return instance_id in self._rows

    def __iter__(self):
        return iter(list(self._rows.values()))

    def __len__(self) -> int:
        return len(self._rows)


@dataclass
class Committed:
    commit_seq: int
    ack: CommitAck
    update_reports: list[UpdateReport]


@dataclass
class Restart:
    report: UpdateReport


@dataclass
class Aborted:
    notice: AbortNotice


@dataclass
class Invalidated:
    invalidation: InvalidationReport


@dataclass
class Superseded:
    """A commit request that arrived after its instance was already decided
    (an older copy overtaken on a different uplink)."""
    instance_id: int
    decision: str


CommitOutcome = Union[Committed, Restart, Aborted, Invalidated, Superseded]


def tie_break(pending: Sequence[CommitRequest], table: CurrentTransactionsTable) -> list[CommitRequest]:
    """Order commits that reached the coordinator in the same tick: earliest
    row arrival first, then lowest site id."""

    def key(req: CommitRequest):
        row = table.get(req.instance_id)
        arrival = row.arrival_time if row is not None else float("inf")
        return (arrival, site_of(req.sender), req.instance_id)

    return sorted(pending, key=key)


class Coordinator:
    def __init__(
        self,
        bs_id: BaseStationId,
        store: Store,
        registry: TransactionInfoRegistry,
        strategy: Strategy = Strategy.MULTICAST_RESTART,
        backward_validation: bool = True,
    ):
        self.bs_id = bs_id
        self.store = store
        self.registry = registry
        self.strategy = Strategy.parse(strategy)
        # switching this off exists only to prove the verifier can catch lost updates
        self.backward_validation = backward_validation
        self.table = CurrentTransactionsTable()
        self.forwarding: dict[int, BaseStationId] = {}
        # routes dropped when a host moved back; still used for messages the
        # host sent through this cell before it left
        self.retired_routes: dict[int, BaseStationId] = {}
        self.registered: set[SiteId] = set()
        self.decided: dict[int, str] = {}
        self._broadcast_seq = len(store.log)

    @property
    def addr(self) -> str:
        return bs_addr(self.bs_id)

    def knows(self, instance_id: int) -> bool:
        return instance_id in self.table or instance_id in self.decided

    def handle_data_request(self, req: DataRequest, now: Timestamp) -> tuple[DataReply, Optional[ConflictNotice]]:
        ttype = self.registry.get(req.txn_type_id)
        items = ttype.data_items(req.row_key)
        fragment = self.store.extract_fragment(items)
        site = site_of(req.sender)
        self.table.upsert(CurrentRow(site, req.instance_id, req.txn_type_id, frozenset(items), now))
        reply = DataReply(
            sender=self.addr, receiver=req.sender,
            instance_id=req.instance_id, fragment=fragment, arrival_time=now,
        )
        others = self.table.intersecting(items, exclude=req.instance_id)
        notice = None
        if others:
            notice = ConflictNotice(
                sender=self.addr, receiver=req.sender,
                instance_id=req.instance_id,
                earliest_arrival=min(r.arrival_time for r in others),
            )
        return reply, notice

    def _stale_items(self, row: CurrentRow, req: CommitRequest) -> list[DataItemId]:
        latest = self.store.latest_version
        return sorted(i for i in row.data_items if req.read_versions.get(i) != latest(i))

    def handle_commit_request(self, req: CommitRequest, now: Timestamp) -> CommitOutcome:
        row = self.table.get(req.instance_id)
        if row is None:
            if req.instance_id in self.decided:
                return Superseded(req.instance_id, self.decided[req.instance_id])
            raise UnknownInstance(req.instance_id)
        stale = self._stale_items(row, req) if self.backward_validation else []
        if stale:
            if self.strategy is Strategy.ABORT_ON_CONFLICT:
                self.table.remove(req.instance_id)
                self.decided[req.instance_id] = "aborted"
                return Aborted(AbortNotice(sender=self.addr, receiver=req.sender, instance_id=req.instance_id))
            row.arrival_time = now
            if self.strategy is Strategy.BROADCAST_INVALIDATE:
                return Invalidated(InvalidationReport(
                    sender=self.addr, receiver=req.sender,
                    item_ids=tuple(stale), instance_id=req.instance_id,
                ))
            return Restart(UpdateReport(
                sender=self.addr, receiver=req.sender, instance_id=req.instance_id,
                fresh_values=self.store.extract_fragment(stale), new_arrival_time=now,
            ))

        seq = self.store.apply_commit(
            req.instance_id, req.read_versions, req.write_set, now,
            txn_type_id=row.txn_type_id, params=req.params, site=row.site,
        )
        self.table.remove(req.instance_id)
        self.decided[req.instance_id] = "committed"
        ack = CommitAck(sender=self.addr, receiver=req.sender, instance_id=req.instance_id, commit_seq=seq)
        reports = []
        if self.strategy is Strategy.MULTICAST_RESTART and req.write_set:
            written = set(req.write_set)
            for other in self.table.intersecting(written):
                other.arrival_time = now
                reports.append(UpdateReport(
                    sender=self.addr, receiver=host_addr(other.site),
                    instance_id=other.instance_id,
                    fresh_values=self.store.extract_fragment(other.data_items & written),
                    new_arrival_time=now,
                ))
        return Committed(seq, ack, reports)

    def handle_withdraw(self, msg: Withdraw, now: Timestamp) -> None:
        if msg.instance_id not in self.table:
            raise UnknownInstance(msg.instance_id)
        self.table.remove(msg.instance_id)
        self.decided[msg.instance_id] = "withdrawn"

    def broadcast_tick(self, now: Timestamp) -> list[InvalidationReport]:
        if self.strategy is not Strategy.BROADCAST_INVALIDATE:
            raise CoordinatorError("broadcast_tick requires the BroadcastInvalidate strategy")
        changed: set[DataItemId] = set()
        for entry in self.store.log.entries[self._broadcast_seq:]:
            changed.update(entry.writes)
        self._broadcast_seq = len(self.store.log)
        if not changed:
            return []
        ids = tuple(sorted(changed))
        return [
            InvalidationReport(sender=self.addr, receiver=host_addr(site), item_ids=ids)
            for site in sorted(self.registered)
        ]

    def route_for(self, instance_id: int) -> BaseStationId:
        """Base station that holds commit authority for a host message."""
        if self.knows(instance_id):
            return self.bs_id
        if instance_id in self.forwarding:
            return self.forwarding[instance_id]
        return self.retired_routes.get(instance_id, self.bs_id)


def handoff_register(
    coordinators: Mapping[BaseStationId, Coordinator],
    instance_id: int,
    old_bs: BaseStationId,
    new_bs: BaseStationId,
) -> list[BaseStationId]:
    """Record that ``instance_id``'s host now sits in ``new_bs``'s cell while
    ``old_bs`` keeps commit authority.  Returns the hop route for host traffic."""
    for bs in (old_bs, new_bs):
        if bs not in coordinators:
            raise UnknownBaseStation(bs)
    if not coordinators[old_bs].knows(instance_id):
        raise UnknownInstance(instance_id)
    for c in coordinators.values():
        if instance_id in c.forwarding:
            c.retired_routes[instance_id] = c.forwarding.pop(instance_id)
    if new_bs == old_bs:
        return [old_bs]
    coordinators[new_bs].forwarding[instance_id] = old_bs
    return [new_bs, old_bs]
