"""Domain types shared by the store, coordinators, hosts and the simulator.

Time is an integer count of simulated milliseconds.  Sites, base stations and
cells are small integers; on the wire they are addressed as ``M<n>`` and
``BS<n>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Optional

Timestamp = int
SiteId = int
BaseStationId = int
CellId = int


class ModelError(Exception):
    pass


class IllegalTransition(ModelError):
    pass


def host_addr(site: SiteId) -> str:
    return f"M{site}"


def bs_addr(bs: BaseStationId) -> str:
    return f"BS{bs}"


def site_of(addr: str) -> SiteId:
    if not addr.startswith("M"):
        raise ValueError(f"not a host address: {addr!r}")
    return int(addr[1:])


def bs_of(addr: str) -> BaseStationId:
    if not addr.startswith("BS"):
        raise ValueError(f"not a base station address: {addr!r}")
    return int(addr[2:])


def is_host(addr: str) -> bool:
    return addr.startswith("M")


class DataItemId(NamedTuple):
    """One attribute of one row of a relation; the unit of conflict."""

    relation: str
    row_key: Any
    attribute: str

    def __str__(self) -> str:
        return f"{self.relation}[{self.row_key}].{self.attribute}"


class VersionedValue(NamedTuple):
    value: int
    version: int


@dataclass(frozen=True)
class TransactionType:
    """A Transaction_Info entry: which relation and attributes a transaction needs."""

    txn_type_id: str
    name: str
    relation: str
    items: tuple[str, ...]

    def __post_init__(self):
        if not self.items:
            raise ModelError(f"transaction type {self.txn_type_id} lists no data items")
        object.__setattr__(self, "items", tuple(self.items))

    def data_items(self, row_key) -> tuple[DataItemId, ...]:
        return tuple(DataItemId(self.relation, row_key, a) for a in self.items)


class TxnParams(NamedTuple):
    row_key: Any
    amount: int = 0


class TxnState(enum.Enum):
    CREATED = "Created"
    REQUESTED = "Requested"
    TENTATIVE = "Tentative"
    LOCALLY_COMMITTED = "LocallyCommitted"
    AWAITING_GLOBAL = "AwaitingGlobal"
    RESTARTING = "Restarting"
    GLOBALLY_COMMITTED = "GloballyCommitted"
    LOCALLY_FAILED = "LocallyFailed"
    ABORTED = "Aborted"
    STARVED = "Starved"

    @property
    def terminal(self) -> bool:
        return self in TERMINAL_STATES


TERMINAL_STATES = frozenset(
    {TxnState.GLOBALLY_COMMITTED, TxnState.LOCALLY_FAILED, TxnState.ABORTED, TxnState.STARVED}
)

_S = TxnState
LEGAL_TRANSITIONS: dict[TxnState, frozenset[TxnState]] = {
    _S.CREATED: frozenset({_S.REQUESTED}),
    _S.REQUESTED: frozenset({_S.TENTATIVE}),
    _S.TENTATIVE: frozenset({_S.LOCALLY_COMMITTED, _S.LOCALLY_FAILED, _S.RESTARTING, _S.STARVED}),
    _S.LOCALLY_COMMITTED: frozenset({_S.AWAITING_GLOBAL}),
    _S.AWAITING_GLOBAL: frozenset(
        {_S.GLOBALLY_COMMITTED, _S.RESTARTING, _S.ABORTED, _S.STARVED}
    ),
    _S.RESTARTING: frozenset({_S.TENTATIVE}),
    _S.GLOBALLY_COMMITTED: frozenset(),
    _S.LOCALLY_FAILED: frozenset(),
    _S.ABORTED: frozenset(),
    _S.STARVED: frozenset(),
}


@dataclass
class TransactionInstance:
    """One live execution of a transaction type at a mobile host.

    ``attempt`` counts local executions and is used to discard compute
    completions that belong to an execution superseded by a restart.
    """

    instance_id: int
    site: SiteId
    txn_type_id: str
    params: TxnParams
    coordinator_of_record: BaseStationId
    begin_time: Timestamp
    state: TxnState = TxnState.CREATED
    arrival_time: Optional[Timestamp] = None
    snapshot: dict[DataItemId, VersionedValue] = field(default_factory=dict)
    restart_count: int = 0
    attempt: int = 0
    write_set: dict[DataItemId, int] = field(default_factory=dict)
    commit_seq: Optional[int] = None
    finish_time: Optional[Timestamp] = None

    def advance(self, new_state: TxnState) -> None:
        if new_state not in LEGAL_TRANSITIONS[self.state]:
            raise IllegalTransition(
                f"instance {self.instance_id}: {self.state.value} -> {new_state.value}"
            )
        self.state = new_state

    def read_versions(self) -> dict[DataItemId, int]:
        return {item: vv.version for item, vv in self.snapshot.items()}


# --- protocol messages -------------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class Message:
    sender: str
    receiver: str

    @property
    def kind(self) -> str:
        return type(self).__name__


@dataclass(frozen=True, kw_only=True)
class DataRequest(Message):
    instance_id: int
    txn_type_id: str
    row_key: Any


@dataclass(frozen=True, kw_only=True)
class DataReply(Message):
    instance_id: int
    fragment: dict[DataItemId, VersionedValue]
    arrival_time: Timestamp


@dataclass(frozen=True, kw_only=True)
class ConflictNotice(Message):
    instance_id: int
    earliest_arrival: Timestamp


@dataclass(frozen=True, kw_only=True)
class CommitRequest(Message):
    instance_id: int
    read_versions: dict[DataItemId, int]
    write_set: dict[DataItemId, int]
    # operation arguments, logged with the commit so it can be replayed
    params: Optional[TxnParams] = None


@dataclass(frozen=True, kw_only=True)
class CommitAck(Message):
    instance_id: int
    commit_seq: int


@dataclass(frozen=True, kw_only=True)
class UpdateReport(Message):
    instance_id: int
    fresh_values: dict[DataItemId, VersionedValue]
    new_arrival_time: Timestamp


@dataclass(frozen=True, kw_only=True)
class HandoffTransfer(Message):
    instance_id: int
    coordinator_of_record: BaseStationId


@dataclass(frozen=True, kw_only=True)
class HandoffForward(Message):
    wrapped: Message


# Baseline-only kinds: the abort verdict of AbortOnConflict, the periodic
# (or directed) invalidation of BroadcastInvalidate, and the row withdrawal a
# starved instance sends when it gives up.


@dataclass(frozen=True, kw_only=True)
class AbortNotice(Message):
    instance_id: int


@dataclass(frozen=True, kw_only=True)
class InvalidationReport(Message):
    item_ids: tuple[DataItemId, ...]
    instance_id: Optional[int] = None


@dataclass(frozen=True, kw_only=True)
class Withdraw(Message):
    instance_id: int


HEADER_BYTES = 16
ID_BYTES = 4
TIME_BYTES = 8
ARG_BYTES = 8
# item-id hash, value, version
ITEM_BYTES = 24
# item-id hash plus one 8-byte scalar
PAIR_BYTES = 16


def message_size_bytes(msg: Message) -> int:
    """Deterministic wire size used for bandwidth accounting."""
    if isinstance(msg, DataRequest):
        return HEADER_BYTES + 3 * ID_BYTES
    if isinstance(msg, DataReply):
        return HEADER_BYTES + ITEM_BYTES * len(msg.fragment)
    if isinstance(msg, UpdateReport):
        return HEADER_BYTES + ITEM_BYTES * len(msg.fresh_values)
    if isinstance(msg, (ConflictNotice, CommitAck)):
        return HEADER_BYTES + ID_BYTES + TIME_BYTES
    if isinstance(msg, CommitRequest):
        return (
            HEADER_BYTES
            + ID_BYTES
            + PAIR_BYTES * (len(msg.read_versions) + len(msg.write_set))
            + (ARG_BYTES if msg.params is not None else 0)
        )
    if isinstance(msg, HandoffTransfer):
        return HEADER_BYTES + 2 * ID_BYTES
    if isinstance(msg, HandoffForward):
        return HEADER_BYTES + message_size_bytes(msg.wrapped)
    if isinstance(msg, (AbortNotice, Withdraw)):
        return HEADER_BYTES + ID_BYTES
    if isinstance(msg, InvalidationReport):
        return HEADER_BYTES + ID_BYTES + TIME_BYTES * len(msg.item_ids)
    raise TypeError(f"unknown message kind {type(msg).__name__}")


def message_instance(msg: Message) -> Optional[int]:
    if isinstance(msg, HandoffForward):
        return message_instance(msg.wrapped)
    return getattr(msg, "instance_id", None)
