"""One simulation run: wires hosts, base stations and the database server
onto the event engine and records a trace of everything that happens."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .config import WorkloadArrival, WorkloadSpec
from .coordinator import (
    Aborted,
    Committed,
    Coordinator,
    Invalidated,
    Restart,
    Superseded,
    Strategy,
    TransactionInfoRegistry,
    handoff_register,
    tie_break,
)
from .host import DisconnectedHost, MobileHost
from .metrics import RunMetrics
from .model import (
    AbortNotice,
    CommitAck,
    CommitRequest,
    ConflictNotice,
    DataItemId,
    DataReply,
    DataRequest,
    HandoffForward,
    HandoffTransfer,
    InvalidationReport,
    Message,
    TxnState,
    UpdateReport,
    Withdraw,
    bs_addr,
    bs_of,
    host_addr,
    is_host,
    message_instance,
    message_size_bytes,
    site_of,
)
from .netsim import EventKind, Link, Network, Scheduler, SimEvent, merge_windows
from .store import Store
from .verify import Verdict, verify_history
from .workload import HostLayout, generate_workload, host_layout


def item_json(item: DataItemId) -> list:
    return [item.relation, item.row_key, item.attribute]


class Simulation:
    def __init__(
        self,
        spec: WorkloadSpec,
        arrivals: Optional[list[WorkloadArrival]] = None,
        layout: Optional[list[HostLayout]] = None,
    ):
        spec.validate()
        self.spec = spec
        self.scheduler = Scheduler()
        self.network = Network(self.scheduler)
        self.registry = TransactionInfoRegistry(spec.catalog)
        self.store = Store.load_initial(spec.relations)
        self.initial = self.store.snapshot()
        self.coordinators = {
            bs: Coordinator(bs, self.store, self.registry, spec.strategy, spec.backward_validation)
            for bs in range(1, spec.cells + 1)
        }
        self.layout = host_layout(spec) if layout is None else layout
        self.hosts: dict[int, MobileHost] = {}
        link_params = dataclasses.asdict(spec.link)
        for h in self.layout:
            host = MobileHost(h.site, h.cell, self.registry, h.compute_delay_ms, spec.restart_cap, spec.strategy)
            self.hosts[h.site] = host
            self.coordinators[h.cell].registered.add(h.site)
            for bs in self.coordinators:
                self.network.add_link(Link(host.addr, bs_addr(bs), outage_windows=list(h.outages), **link_params))
        bb = spec.backbone
        for a in self.coordinators:
            for b in self.coordinators:
                if a < b:
                    self.network.add_link(Link(
                        bs_addr(a), bs_addr(b), bb.latency_ms, bb.latency_ms, bb.bytes_per_ms, bb.bytes_per_ms,
                    ))
        self.arrivals = generate_workload(spec) if arrivals is None else list(arrivals)
        self.records: list[dict] = []
        self.dropped = 0
        self.decision_sites: dict[int, int] = {}
        self._pending_commits: dict[int, list[CommitRequest]] = {}
        self._next_instance = 1
        self._arrivals_left = len(self.arrivals)
        self._ran = False
        self._schedule_initial()

    # -- trace ----------------------------------------------------------------

    def _record(self, kind: str, actor: str, instance: Optional[int] = None, **detail) -> None:
        self.records.append({
            "time_ms": self.scheduler.now,
            "kind": kind,
            "actor": actor,
            "instance": instance,
            "detail": detail,
        })

    def _schedule_initial(self) -> None:
        self._record(
            "load", "DBS",
            relations=[
                {"name": r.name, "schema": list(r.schema), "rows": r.plain_rows()}
                for r in self.initial.relations.values()
            ],
            catalog=[
                {"id": t.txn_type_id, "name": t.name, "relation": t.relation, "items": list(t.items)}
                for t in self.registry
            ],
            strategy=self.spec.strategy.label,
            seed=self.spec.seed,
        )
        sched = self.scheduler
        for h in self.layout:
            addr = self.hosts[h.site].addr
            for start, end in merge_windows(h.outages):
                sched.schedule(start, EventKind.CONNECTIVITY_CHANGE, addr, False, self._on_connectivity)
                sched.schedule(end, EventKind.CONNECTIVITY_CHANGE, addr, True, self._on_connectivity)
            for when, cell in h.moves:
                sched.schedule(when, EventKind.CELL_MOVE, addr, cell, self._on_move)
        for a in self.arrivals:
            sched.schedule(a.time, EventKind.WORKLOAD_ARRIVAL, host_addr(a.site), a, self._on_arrival)
        if self.spec.strategy is Strategy.BROADCAST_INVALIDATE:
            sched.schedule(self.spec.broadcast_period_ms, EventKind.BROADCAST_TICK, "DBS", None, self._on_tick)

    # -- plumbing -------------------------------------------------------------

    def _flush(self, host: MobileHost) -> None:
        msgs, timers, notes = host.drain()
        for kind, iid, detail in notes:
            self._record(kind, host.addr, iid, **detail)
        now = self.scheduler.now
        for t in timers:
            self.scheduler.schedule(now + t.delay, EventKind.COMPUTE_DONE, host.addr, t, self._on_compute)
        for msg in msgs:
            self.network.send(msg, host.addr, msg.receiver, self._on_delivery)

    def _to_host(self, bs: int, msg: Message) -> None:
        """Send from base station ``bs`` to a host wherever it currently is."""
        here = self.hosts[site_of(msg.receiver)].bs
        if here == bs:
            self.network.send(msg, bs_addr(bs), msg.receiver, self._on_delivery)
        else:
            fwd = HandoffForward(sender=bs_addr(bs), receiver=bs_addr(here), wrapped=msg)
            self.network.send(fwd, action=self._on_delivery)

    def _on_delivery(self, ev: SimEvent) -> None:
        src, msg = ev.payload
        self._record(
            EventKind.MESSAGE_DELIVERY.value, ev.actor, message_instance(msg),
            msg=msg.kind, hop=[src, ev.actor], bytes=message_size_bytes(msg),
        )
        if is_host(ev.actor):
            self._host_receive(self.hosts[site_of(ev.actor)], msg)
        else:
            bs = bs_of(ev.actor)
            if isinstance(msg, HandoffForward):
                inner = msg.wrapped
                if is_host(inner.receiver):
                    self._to_host(bs, inner)
                else:
                    self._bs_receive(bs, inner)
            else:
                self._bs_receive(bs, msg)

    # -- base stations --------------------------------------------------------

    def _bs_receive(self, bs: int, msg: Message) -> None:
        coord = self.coordinators[bs]
        now = self.scheduler.now
        if isinstance(msg, HandoffTransfer):
            route = handoff_register(self.coordinators, msg.instance_id, msg.coordinator_of_record, bs)
            self._record("handoff", coord.addr, msg.instance_id, route=[bs_addr(b) for b in route])
            return
        iid = message_instance(msg)
        target = coord.route_for(iid)
        if target != bs:
            fwd = HandoffForward(sender=coord.addr, receiver=bs_addr(target), wrapped=msg)
            self.network.send(fwd, action=self._on_delivery)
            return
        if isinstance(msg, DataRequest):
            reply, notice = coord.handle_data_request(msg, now)
            self._record(
                "data_request", coord.addr, iid, site=msg.sender,
                conflict=None if notice is None else notice.earliest_arrival,
            )
            self._to_host(bs, reply)
            if notice is not None:
                self._to_host(bs, notice)
        elif isinstance(msg, CommitRequest):
            batch = self._pending_commits.setdefault(bs, [])
            if not batch:
                self.scheduler.schedule(now, EventKind.COMMIT_BATCH, coord.addr, bs, self._on_commit_batch)
            batch.append(msg)
        elif isinstance(msg, Withdraw):
            coord.handle_withdraw(msg, now)
            self._record("withdraw", coord.addr, iid)
        else:
            raise TypeError(f"base station cannot handle {msg.kind}")

    def _on_commit_batch(self, ev: SimEvent) -> None:
        bs = ev.payload
        coord = self.coordinators[bs]
        batch = self._pending_commits.pop(bs)
        now = self.scheduler.now
        for req in tie_break(batch, coord.table):
            outcome = coord.handle_commit_request(req, now)
            iid = req.instance_id
            if isinstance(outcome, Committed):
                entry = self.store.log[outcome.commit_seq - 1]
                self.decision_sites[iid] = bs
                self._record(
                    "commit", coord.addr, iid,
                    seq=entry.commit_seq, site=req.sender, txn=entry.txn_type_id,
                    params=list(entry.params) if entry.params is not None else None,
                    reads=[item_json(i) + [v] for i, v in sorted(entry.read_versions.items())],
                    writes=[item_json(i) + [b.value, b.version, a] for i, (b, a) in entry.writes.items()],
                    multicast=[r.instance_id for r in outcome.update_reports],
                )
                self._to_host(bs, outcome.ack)
                for report in outcome.update_reports:
                    self._to_host(bs, report)
            elif isinstance(outcome, Restart):
                self._record("restart_directive", coord.addr, iid,
                             stale=[item_json(i) for i in outcome.report.fresh_values])
                self._to_host(bs, outcome.report)
            elif isinstance(outcome, Aborted):
                self.decision_sites[iid] = bs
                self._record("abort", coord.addr, iid)
                self._to_host(bs, outcome.notice)
            elif isinstance(outcome, Superseded):
                self._record("superseded_request", coord.addr, iid, decision=outcome.decision)
            elif isinstance(outcome, Invalidated):
                self._record("invalidate", coord.addr, iid,
                             stale=[item_json(i) for i in outcome.invalidation.item_ids])
                self._to_host(bs, outcome.invalidation)

    def _work_remaining(self) -> bool:
        if self._arrivals_left or any(h.active for h in self.hosts.values()):
            return True
        return any(c._broadcast_seq < len(self.store.log) for c in self.coordinators.values())

    def _on_tick(self, ev: SimEvent) -> None:
        now = self.scheduler.now
        sent = 0
        for bs, coord in self.coordinators.items():
            for inv in coord.broadcast_tick(now):
                self._to_host(bs, inv)
                sent += 1
        self._record(EventKind.BROADCAST_TICK.value, "DBS", None, messages=sent)
        if self._work_remaining():
            self.scheduler.schedule(now + self.spec.broadcast_period_ms, EventKind.BROADCAST_TICK,
                                    "DBS", None, self._on_tick)

    # -- hosts ----------------------------------------------------------------

    def _host_receive(self, host: MobileHost, msg: Message) -> None:
        now = self.scheduler.now
        if isinstance(msg, DataReply):
            host.on_data_reply(msg, now)
        elif isinstance(msg, ConflictNotice):
            host.on_conflict_notice(msg, now)
        elif isinstance(msg, UpdateReport):
            host.on_update_report(msg, now)
        elif isinstance(msg, CommitAck):
            host.on_commit_ack(msg, now)
        elif isinstance(msg, AbortNotice):
            host.on_abort_notice(msg, now)
        elif isinstance(msg, InvalidationReport):
            host.on_invalidation(msg, now)
        else:
            raise TypeError(f"host cannot handle {msg.kind}")
        self._flush(host)

    def _on_arrival(self, ev: SimEvent) -> None:
        a: WorkloadArrival = ev.payload
        host = self.hosts[a.site]
        self._arrivals_left -= 1
        self._record(EventKind.WORKLOAD_ARRIVAL.value, host.addr, None, txn=a.txn_type_id)
        try:
            host.begin_transaction(self._next_instance, a.txn_type_id, a.params, self.scheduler.now)
        except DisconnectedHost:
            self.dropped += 1
            self._record("dropped", host.addr, None, txn=a.txn_type_id)
            return
        self._next_instance += 1
        self._flush(host)

    def _on_compute(self, ev: SimEvent) -> None:
        host = self.hosts[site_of(ev.actor)]
        timer = ev.payload
        self._record(EventKind.COMPUTE_DONE.value, host.addr, timer.instance_id, attempt=timer.attempt)
        host.on_compute_done(timer.instance_id, timer.attempt, self.scheduler.now)
        self._flush(host)

    def _on_connectivity(self, ev: SimEvent) -> None:
        host = self.hosts[site_of(ev.actor)]
        self._record(EventKind.CONNECTIVITY_CHANGE.value, host.addr, None, connected=ev.payload)
        host.set_connectivity(ev.payload, self.scheduler.now)
        self._flush(host)

    def _on_move(self, ev: SimEvent) -> None:
        host = self.hosts[site_of(ev.actor)]
        new_cell = ev.payload
        self._record(EventKind.CELL_MOVE.value, host.addr, None, cell=new_cell)
        self.coordinators[host.bs].registered.discard(host.site)
        self.coordinators[new_cell].registered.add(host.site)
        host.move_cell(new_cell, self.scheduler.now)
        self._flush(host)

    # -- results --------------------------------------------------------------

    def instances(self):
        for site in sorted(self.hosts):
            h = self.hosts[site]
            yield from h.finished.values()
            yield from h.active.values()

    def run(self) -> "SimResult":
        if self._ran:
            raise RuntimeError("a Simulation runs once")
        self._ran = True
        self.scheduler.run_until(None)
        final = self.store.state()
        self._record("final", "DBS", None,
                     state=[item_json(i) + [vv.value, vv.version] for i, vv in final.items()],
                     commits=len(self.store.log))
        verdict = verify_history(
            {i: vv.value for i, vv in Store().restore(self.initial).state().items()},
            {i: vv.value for i, vv in final.items()},
            self.store.log,
            self.registry.entries,
        )
        return SimResult(self, self._metrics(verdict), verdict)

    def _metrics(self, verdict: Verdict) -> RunMetrics:
        insts = list(self.instances())
        counts = {s: 0 for s in TxnState}
        for i in insts:
            counts[i.state] += 1
        m = RunMetrics(
            strategy=self.spec.strategy.label,
            seed=self.spec.seed,
            hosts=len(self.hosts),
            transactions=len(insts),
            committed=counts[TxnState.GLOBALLY_COMMITTED],
            aborted=counts[TxnState.ABORTED],
            locally_failed=counts[TxnState.LOCALLY_FAILED],
            starved=counts[TxnState.STARVED],
            dropped_arrivals=self.dropped,
        )
        m.unfinished = m.transactions - m.terminal
        for h in self.hosts.values():
            m.restarted += h.counters["restarts"]
            m.stale_reports += h.counters["stale_reports"]
            m.redundant_reports += h.counters["redundant_reports"]
            m.conflict_notices += h.counters["conflict_notices"]
            m.restart_uplink_messages += h.counters["restart_uplink"]
            m.superseded_acks += h.counters["superseded_acks"]
        for link in self.network.links.values():
            if is_host(link.a):
                m.uplink_messages += link.msgs_up
                m.uplink_bytes += link.bytes_up
                m.downlink_messages += link.msgs_down
                m.downlink_bytes += link.bytes_down
            else:
                m.backbone_messages += link.msgs_up + link.msgs_down
                m.backbone_bytes += link.bytes_up + link.bytes_down
        done = [i for i in insts if i.state is TxnState.GLOBALLY_COMMITTED]
        m.latency_mean_ms, m.latency_median_ms, m.latency_p95_ms = RunMetrics.latency_summary(
            [i.finish_time - i.begin_time for i in done]
        )
        finishes = [i.finish_time for i in insts if i.finish_time is not None]
        m.makespan_ms = max(finishes, default=0)
        m.set_window(m.makespan_ms)
        m.serializable = verdict.ok
        return m


@dataclass
class SimResult:
    sim: Simulation
    metrics: RunMetrics
    verdict: Verdict

    @property
    def records(self) -> list[dict]:
        return self.sim.records

    @property
    def store(self) -> Store:
        return self.sim.store


def simulate(spec: WorkloadSpec, **kw) -> SimResult:
    return Simulation(spec, **kw).run()
