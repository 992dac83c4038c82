import pytest

from helpers import commits, deliveries, table_matches_unfinished, uplink_between_restart_and_commit
from mobocc.config import HostOverride, WorkloadArrival, WorkloadSpec
from mobocc.coordinator import Strategy
from mobocc.model import DataItemId, TxnParams
from mobocc.netsim import Scheduler
from mobocc.scenarios import builtin, hotspot
from mobocc.simulation import Simulation, simulate
from mobocc.workload import generate_workload

AMT = "Account[103].Amount"


def test_case_i_golden():
    r = simulate(builtin("banking-case-i"))
    assert commits(r) == [("M1", {AMT: 12500}), ("M2", {AMT: 12000})]
    assert (r.metrics.restarted, r.metrics.aborted, r.metrics.committed) == (1, 0, 2)
    assert r.verdict.ok


def test_case_ii_golden():
    r = simulate(builtin("banking-case-ii"))
    assert commits(r) == [("M2", {AMT: 11000}), ("M1", {AMT: 12000})]
    assert (r.metrics.restarted, r.metrics.aborted) == (1, 0)


def test_case_iii_same_tick():
    r = simulate(builtin("banking-case-iii"))
    arrivals = [d["time_ms"] for d in deliveries(r, "CommitRequest")]
    assert arrivals[0] == arrivals[1]
    assert commits(r)[0] == ("M1", {AMT: 12500})
    assert [x["instance"] for x in r.records if x["kind"] == "restart_directive"] == [2]
    assert r.store.read(DataItemId("Account", 103, "Amount")).value == 12000


def test_rows_recorded_at_expected_times():
    r = simulate(builtin("banking-case-i"))
    got = [(x["detail"]["site"], x["time_ms"]) for x in r.records if x["kind"] == "data_request"]
    assert got == [("M1", 605000), ("M2", 610000)]
    notice = [x for x in r.records if x["kind"] == "data_request" and x["detail"]["conflict"]]
    assert notice[0]["detail"]["conflict"] == 605000


def test_same_spec_same_trace():
    a, b = simulate(hotspot(5)), simulate(hotspot(5))
    assert a.records == b.records
    assert a.records != simulate(hotspot(6)).records


def test_simulation_runs_once():
    sim = Simulation(builtin("banking-case-i"))
    sim.run()
    with pytest.raises(RuntimeError):
        sim.run()


def test_causality_and_monotone_clock(monkeypatch):
    events = []
    orig = Scheduler.schedule

    def spy(self, *a, **kw):
        ev = orig(self, *a, **kw)
        events.append(ev)
        return ev

    monkeypatch.setattr(Scheduler, "schedule", spy)
    r = simulate(hotspot(2, hosts=8))
    assert events and all(ev.scheduled_at <= ev.fire_at for ev in events)
    times = [x["time_ms"] for x in r.records]
    assert times == sorted(times)


@pytest.mark.parametrize("strategy", list(Strategy))
def test_byte_accounting(strategy):
    r = simulate(hotspot(3, hosts=8).with_(strategy=strategy))
    m, net = r.metrics, r.sim.network
    per_link = sum(l.bytes_up + l.bytes_down for l in net.links.values())
    assert per_link == net.bytes_sent == m.total_bytes
    hop_bytes = sum(x["detail"]["bytes"] for x in deliveries(r))
    assert hop_bytes == net.bytes_sent
    assert m.terminal + m.unfinished == m.transactions and m.unfinished == 0


def test_strategies_share_workload():
    spec = hotspot(4)
    runs = [simulate(spec.with_(strategy=s)) for s in Strategy]
    lists = [generate_workload(spec.with_(strategy=s)) for s in Strategy]
    assert lists[0] == lists[1] == lists[2]
    arrivals = [[(x["time_ms"], x["actor"], x["detail"]) for x in r.records if x["kind"] == "WorkloadArrival"]
                for r in runs]
    assert arrivals[0] == arrivals[1] == arrivals[2]


@pytest.mark.parametrize("seed", range(5))
def test_table_hygiene(seed):
    r = simulate(hotspot(seed, hosts=12))
    assert table_matches_unfinished(r.sim)
    committed = {x["instance"] for x in r.records if x["kind"] == "commit"}
    for c in r.sim.coordinators.values():
        assert committed.isdisjoint(row.instance_id for row in c.table)


@pytest.mark.parametrize("seed", range(5))
def test_multicast_targets_only_interested_hosts(seed):
    r = simulate(hotspot(seed, hosts=12))
    by_id = {i.instance_id: i for i in r.sim.instances()}
    registry = r.sim.registry
    for x in r.records:
        if x["kind"] != "commit":
            continue
        written = {tuple(w[:3]) for w in x["detail"]["writes"]}
        for iid in x["detail"]["multicast"]:
            inst = by_id[iid]
            items = {tuple(i) for i in registry.get(inst.txn_type_id).data_items(inst.params.row_key)}
            assert items & written
            assert inst.begin_time <= x["time_ms"]


@pytest.mark.parametrize("seed", range(5))
def test_restart_needs_no_uplink(seed):
    r = simulate(hotspot(seed))
    assert r.metrics.restarted > 0
    assert uplink_between_restart_and_commit(r) == []
    assert r.metrics.restart_uplink_messages == 0


def test_versions_agree_with_log():
    r = simulate(hotspot(1))
    last = {}
    for e in r.store.log:
        for item in e.writes:
            last[item] = e.commit_seq
    for item, vv in r.store.state().items():
        assert vv.version == last.get(item, 0)


def test_handoff_paths():
    r = simulate(builtin("handoff"))
    assert r.verdict.ok and commits(r) == [("M1", {AMT: 12500}), ("M2", {AMT: 12000})]
    assert r.sim.decision_sites[2] == 1
    commit_rec = [x for x in r.records if x["kind"] == "commit" and x["instance"] == 2][0]
    assert commit_rec["actor"] == "BS1"
    hops = [tuple(x["detail"]["hop"]) for x in deliveries(r, instance=2) if x["time_ms"] > 611000]
    assert ("BS2", "BS1") in hops and ("BS1", "BS2") in hops


def test_broadcast_floods_uninterested_hosts():
    spec = builtin("banking-case-i").with_(hosts=3, strategy=Strategy.BROADCAST_INVALIDATE)
    r = simulate(spec)
    assert r.verdict.ok
    to_m3 = [x for x in deliveries(r, "InvalidationReport") if x["actor"] == "M3"]
    assert to_m3
    m = simulate(spec.with_(strategy=Strategy.MULTICAST_RESTART))
    assert not [x for x in deliveries(m) if x["actor"] == "M3"]


def test_abort_strategy_aborts():
    r = simulate(builtin("banking-case-i").with_(strategy=Strategy.ABORT_ON_CONFLICT))
    assert r.metrics.aborted == 1 and r.metrics.committed == 1 and r.verdict.ok


def test_restart_cap_zero_starves():
    r = simulate(builtin("banking-case-i").with_(restart_cap=0))
    assert r.metrics.starved == 1 and r.metrics.committed == 1
    assert r.verdict.ok and table_matches_unfinished(r.sim)


def test_local_failure_not_an_abort():
    spec = builtin("banking-case-i").with_(script=[WorkloadArrival(0, 1, "T2", TxnParams(101, 10**6))])
    r = simulate(spec)
    assert r.metrics.locally_failed == 1 and r.metrics.aborted == 0 and r.metrics.committed == 0


def test_arrival_while_offline_dropped():
    spec = WorkloadSpec(hosts=1, script=[WorkloadArrival(10, 1, "T1", TxnParams(101, 5))],
                        host_overrides=[HostOverride(1, outages=[(0, 100)])])
    r = simulate(spec)
    assert r.metrics.dropped_arrivals == 1 and r.metrics.transactions == 0


def test_validation_off_breaks_history():
    bad = 0
    for seed in range(10):
        r = simulate(hotspot(seed).with_(backward_validation=False))
        bad += not r.verdict.ok
    assert bad > 0


@pytest.mark.parametrize("seed", range(5))
def test_no_superseded_acks_with_validation(seed):
    assert simulate(hotspot(seed)).metrics.superseded_acks == 0


def test_sizes_in_trace_match_encoder():
    r = simulate(builtin("banking-case-i"))
    sizes = {x["detail"]["msg"]: x["detail"]["bytes"] for x in deliveries(r)}
    assert sizes["DataRequest"] == 28 and sizes["DataReply"] == 64 and sizes["CommitAck"] == 28
