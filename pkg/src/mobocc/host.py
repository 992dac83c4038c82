"""Mobile host: local (tentative) execution, restarts and disconnection.

The host never talks to the simulator directly.  Every handler leaves its
side effects in three buffers that the simulation drains after the call:
outgoing messages, compute timers and trace notes.
"""

from __future__ import annotations

import dataclasses
from collections import Counter, deque
from typing import Mapping, NamedTuple, Optional, Union

from .coordinator import Strategy, TransactionInfoRegistry
from .model import (
    AbortNotice,
    BaseStationId,
    CellId,
    CommitAck,
    CommitRequest,
    ConflictNotice,
    DataItemId,
    DataReply,
    DataRequest,
    HandoffTransfer,
    InvalidationReport,
    Message,
    SiteId,
    Timestamp,
    TransactionInstance,
    TransactionType,
    TxnParams,
    TxnState,
    UpdateReport,
    VersionedValue,
    Withdraw,
    bs_addr,
    host_addr,
)


class HostError(Exception):
    pass


class DisconnectedHost(HostError):
    pass


class UnknownInstance(HostError):
    pass


class WriteSetResult(NamedTuple):
    write_set: dict[DataItemId, int]


class LocalFailure(NamedTuple):
    reason: str


LogicResult = Union[WriteSetResult, LocalFailure]


def _balance_item(ttype: TransactionType, params: TxnParams) -> DataItemId:
    # the last listed attribute carries the amount (Account_no, Amount)
    return DataItemId(ttype.relation, params.row_key, ttype.items[-1])


def deposit(ttype, snapshot, params) -> LogicResult:
    item = _balance_item(ttype, params)
    return WriteSetResult({item: snapshot[item].value + params.amount})


def withdraw(ttype, snapshot, params) -> LogicResult:
    item = _balance_item(ttype, params)
    balance = snapshot[item].value
    if balance < params.amount:
        return LocalFailure("insufficient")
    return WriteSetResult({item: balance - params.amount})


def enquiry(ttype, snapshot, params) -> LogicResult:
    return WriteSetResult({})


TRANSACTION_LOGIC = {"Deposit": deposit, "Withdraw": withdraw, "Enquiry": enquiry}


def run_logic(
    ttype: TransactionType,
    snapshot: Mapping[DataItemId, VersionedValue],
    params: TxnParams,
) -> LogicResult:
    try:
        fn = TRANSACTION_LOGIC[ttype.name]
    except KeyError:
        raise HostError(f"no logic for transaction {ttype.name!r}") from None
    return fn(ttype, snapshot, params)


class Timer(NamedTuple):
    delay: int
    instance_id: int
    attempt: int


class MobileHost:
    def __init__(
        self,
        site: SiteId,
        cell: CellId,
        registry: TransactionInfoRegistry,
        compute_delay: int = 1000,
        restart_cap: Optional[int] = None,
        strategy: Strategy = Strategy.MULTICAST_RESTART,
    ):
        self.site = site
        self.cell = cell
        self.registry = registry
        self.compute_delay = compute_delay
        self.restart_cap = restart_cap
        self.strategy = Strategy.parse(strategy)
        self.connected = True
        self.active: dict[int, TransactionInstance] = {}
        self.finished: dict[int, TransactionInstance] = {}
        self.pending_outbox: deque[tuple[TransactionInstance, Message]] = deque()
        self.counters: Counter = Counter()
        self._registered_at: dict[int, BaseStationId] = {}
        self._out: list[Message] = []
        self._timers: list[Timer] = []
        self._notes: list[tuple[str, Optional[int], dict]] = []

    @property
    def addr(self) -> str:
        return host_addr(self.site)

    @property
    def bs(self) -> BaseStationId:
        # base station i serves cell i
        return self.cell

    def drain(self) -> tuple[list[Message], list[Timer], list[tuple[str, Optional[int], dict]]]:
        out, timers, notes = self._out, self._timers, self._notes
        self._out, self._timers, self._notes = [], [], []
        return out, timers, notes

    def instance(self, instance_id: int) -> TransactionInstance:
        inst = self.active.get(instance_id) or self.finished.get(instance_id)
        if inst is None:
            raise UnknownInstance(instance_id)
        return inst

    def _note(self, kind: str, instance_id: Optional[int], **detail) -> None:
        self._notes.append((kind, instance_id, detail))

    def _finish(self, inst: TransactionInstance, state: TxnState, now: Timestamp) -> None:
        inst.advance(state)
        inst.finish_time = now
        self.finished[inst.instance_id] = self.active.pop(inst.instance_id)

    def _uplink(self, inst: TransactionInstance, msg: Message) -> None:
        if not self.connected:
            self.pending_outbox.append((inst, msg))
            return
        here = self.bs
        iid = inst.instance_id
        if self._registered_at.get(iid, inst.coordinator_of_record) != here:
            self._out.append(HandoffTransfer(
                sender=self.addr, receiver=bs_addr(here),
                instance_id=iid, coordinator_of_record=inst.coordinator_of_record,
            ))
            self._registered_at[iid] = here
            self.counters["handoffs"] += 1
        if msg.receiver != bs_addr(here):
            msg = dataclasses.replace(msg, receiver=bs_addr(here))
        self._out.append(msg)

    # -- transaction lifecycle ------------------------------------------------

    def begin_transaction(
        self, instance_id: int, txn_type_id: str, params: TxnParams, now: Timestamp
    ) -> TransactionInstance:
        if not self.connected:
            raise DisconnectedHost(self.addr)
        self.registry.get(txn_type_id)
        inst = TransactionInstance(
            instance_id=instance_id, site=self.site, txn_type_id=txn_type_id,
            params=params, coordinator_of_record=self.bs, begin_time=now,
        )
        self.active[instance_id] = inst
        self._registered_at[instance_id] = self.bs
        inst.advance(TxnState.REQUESTED)
        self._uplink(inst, DataRequest(
            sender=self.addr, receiver=bs_addr(self.bs),
            instance_id=instance_id, txn_type_id=txn_type_id, row_key=params.row_key,
        ))
        self._note("begin", instance_id, txn=txn_type_id, row=params.row_key, amount=params.amount)
        return inst

    def _schedule_compute(self, inst: TransactionInstance, compute_delay: Optional[int]) -> None:
        delay = self.compute_delay if compute_delay is None else compute_delay
        self._timers.append(Timer(delay, inst.instance_id, inst.attempt))

    def _check_coverage(self, inst: TransactionInstance) -> None:
        expected = set(self.registry.get(inst.txn_type_id).data_items(inst.params.row_key))
        if set(inst.snapshot) != expected:
            raise HostError(f"instance {inst.instance_id}: snapshot does not cover its data items")

    def on_data_reply(self, reply: DataReply, now: Timestamp, compute_delay: Optional[int] = None) -> None:
        inst = self.instance(reply.instance_id)
        if inst.state.terminal:
            self.counters["stale_reports"] += 1
            return
        inst.advance(TxnState.TENTATIVE)
        inst.snapshot = dict(reply.fragment)
        inst.arrival_time = reply.arrival_time
        self._check_coverage(inst)
        self._schedule_compute(inst, compute_delay)

    def on_conflict_notice(self, notice: ConflictNotice, now: Timestamp) -> None:
        self.instance(notice.instance_id)
        self.counters["conflict_notices"] += 1
        self._note("conflict_notice", notice.instance_id, earliest_arrival=notice.earliest_arrival)

    def on_compute_done(self, instance_id: int, attempt: int, now: Timestamp) -> None:
        inst = self.active.get(instance_id)
        if inst is None or inst.attempt != attempt or inst.state is not TxnState.TENTATIVE:
            return  # superseded by a restart
        ttype = self.registry.get(inst.txn_type_id)
        result = run_logic(ttype, inst.snapshot, inst.params)
        if isinstance(result, LocalFailure):
            self._finish(inst, TxnState.LOCALLY_FAILED, now)
            self._note("local_failure", instance_id, reason=result.reason)
            return
        inst.write_set = dict(result.write_set)
        inst.advance(TxnState.LOCALLY_COMMITTED)
        self._note("local_commit", instance_id, writes={str(k): v for k, v in sorted(inst.write_set.items())})
        self.submit_commit(instance_id, now)

    def submit_commit(self, instance_id: int, now: Timestamp) -> CommitRequest:
        inst = self.instance(instance_id)
        inst.advance(TxnState.AWAITING_GLOBAL)
        msg = CommitRequest(
            sender=self.addr, receiver=bs_addr(self.bs), instance_id=instance_id,
            read_versions=inst.read_versions(), write_set=dict(inst.write_set),
            params=inst.params,
        )
        self._uplink(inst, msg)
        return msg

    def _starve(self, inst: TransactionInstance, now: Timestamp) -> None:
        self._finish(inst, TxnState.STARVED, now)
        self._note("starved", inst.instance_id, restarts=inst.restart_count)
        self._uplink(inst, Withdraw(sender=self.addr, receiver=bs_addr(self.bs), instance_id=inst.instance_id))

    def _over_cap(self, inst: TransactionInstance) -> bool:
        return self.restart_cap is not None and inst.restart_count >= self.restart_cap

    def on_update_report(self, report: UpdateReport, now: Timestamp, compute_delay: Optional[int] = None) -> None:
        inst = self.instance(report.instance_id)
        if inst.state.terminal:
            self.counters["stale_reports"] += 1
            self._note("stale_report", inst.instance_id)
            return
        if inst.state not in (TxnState.TENTATIVE, TxnState.AWAITING_GLOBAL):
            raise HostError(f"instance {inst.instance_id}: update report in state {inst.state.value}")
        newer = any(vv.version > inst.snapshot[item].version for item, vv in report.fresh_values.items())
        if not newer:
            # already restarted on these (or later) values
            self.counters["redundant_reports"] += 1
            return
        if self._over_cap(inst):
            self._starve(inst, now)
            return
        inst.advance(TxnState.RESTARTING)
        inst.snapshot.update(report.fresh_values)
        inst.arrival_time = report.new_arrival_time
        inst.restart_count += 1
        inst.attempt += 1
        inst.write_set = {}
        self.counters["restarts"] += 1
        inst.advance(TxnState.TENTATIVE)
        self._check_coverage(inst)
        self._note("restart", inst.instance_id, count=inst.restart_count,
                   fresh={str(k): list(v) for k, v in sorted(report.fresh_values.items())})
        self._schedule_compute(inst, compute_delay)

    def on_commit_ack(self, ack: CommitAck, now: Timestamp) -> None:
        inst = self.instance(ack.instance_id)
        inst.commit_seq = ack.commit_seq
        if inst.state in (TxnState.TENTATIVE, TxnState.RESTARTING):
            # Only a coordinator that skips backward validation can commit a
            # request after restarting its sender.  The coordinator's word is
            # final, so the re-execution is dropped; the counter lets callers
            # assert this never happens on a correct coordinator.
            self.counters["superseded_acks"] += 1
            self._note("ack_after_restart", inst.instance_id, seq=ack.commit_seq)
            inst.state = TxnState.AWAITING_GLOBAL
        self._finish(inst, TxnState.GLOBALLY_COMMITTED, now)
        self._note("committed", inst.instance_id, seq=ack.commit_seq)

    def on_abort_notice(self, notice: AbortNotice, now: Timestamp) -> None:
        inst = self.instance(notice.instance_id)
        self._finish(inst, TxnState.ABORTED, now)
        self._note("aborted", inst.instance_id)

    def _refetch(self, inst: TransactionInstance, now: Timestamp) -> None:
        if self._over_cap(inst):
            self._starve(inst, now)
            return
        inst.advance(TxnState.RESTARTING)
        inst.restart_count += 1
        inst.attempt += 1
        inst.write_set = {}
        self.counters["restarts"] += 1
        self.counters["restart_uplink"] += 1
        self._note("restart", inst.instance_id, count=inst.restart_count, refetch=True)
        self._uplink(inst, DataRequest(
            sender=self.addr, receiver=bs_addr(self.bs), instance_id=inst.instance_id,
            txn_type_id=inst.txn_type_id, row_key=inst.params.row_key,
        ))

    def on_invalidation(self, inv: InvalidationReport, now: Timestamp) -> None:
        if inv.instance_id is not None:
            inst = self.instance(inv.instance_id)
            if inst.state.terminal:
                self.counters["stale_reports"] += 1
            elif inst.state is TxnState.AWAITING_GLOBAL:
                self._refetch(inst, now)
            else:
                self.counters["redundant_reports"] += 1
            return
        ids = set(inv.item_ids)
        for iid in sorted(self.active):
            inst = self.active[iid]
            # commits already in flight are judged by the coordinator instead
            if inst.state is TxnState.TENTATIVE and not ids.isdisjoint(inst.snapshot):
                self._refetch(inst, now)

    # -- connectivity and mobility -------------------------------------------

    def set_connectivity(self, connected: bool, now: Timestamp) -> None:
        if connected == self.connected:
            return
        self.connected = connected
        self._note("connect" if connected else "disconnect", None)
        if connected:
            queued, self.pending_outbox = self.pending_outbox, deque()
            for inst, msg in queued:
                if isinstance(msg, HandoffTransfer):
                    continue
                self._uplink(inst, msg)

    def move_cell(self, new_cell: CellId, now: Timestamp) -> None:
        old = self.cell
        self.cell = new_cell
        self._note("move", None, old_cell=old, new_cell=new_cell)
        if not self.connected:
            return  # registration is brought up to date when the outbox flushes
        for iid in sorted(self.active):
            inst = self.active[iid]
            if inst.state is TxnState.REQUESTED:
                continue  # coordinator has not seen it yet; registered on first uplink
            if self._registered_at.get(iid, inst.coordinator_of_record) != self.bs:
                self._out.append(HandoffTransfer(
                    sender=self.addr, receiver=bs_addr(self.bs),
                    instance_id=iid, coordinator_of_record=inst.coordinator_of_record,
                ))
                self._registered_at[iid] = self.bs
                self.counters["handoffs"] += 1
