import pytest

from mobocc.model import DataItemId, DataReply, DataRequest, VersionedValue, message_size_bytes
from mobocc.netsim import (
    EventKind, Link, LinkConfigError, Network, NoSuchLink, Scheduler, SchedulingIntoPast,
    merge_windows,
)


def req():
    return DataRequest(sender="M1", receiver="BS1", instance_id=1, txn_type_id="T1", row_key=103)


def reply():
    frag = {DataItemId("Account", 103, "Amount"): VersionedValue(11500, 0),
            DataItemId("Account", 103, "Account_no"): VersionedValue(103, 0)}
    return DataReply(sender="BS1", receiver="M1", instance_id=1, fragment=frag, arrival_time=0)


def test_same_time_fires_in_schedule_order():
    s = Scheduler()
    order = []
    for name in "abc":
        s.schedule(10, EventKind.COMPUTE_DONE, name, action=lambda ev: order.append(ev.actor))
    s.run_until()
    assert order == ["a", "b", "c"]


def test_event_at_now_fires_before_clock_advances():
    s = Scheduler()
    seen = []
    s.schedule(0, EventKind.COMPUTE_DONE, action=lambda ev: seen.append(s.now))
    s.schedule(5, EventKind.COMPUTE_DONE)
    s.run_until()
    assert seen == [0]


def test_scheduling_into_past():
    s = Scheduler()
    s.schedule(10, EventKind.COMPUTE_DONE)
    s.run_until()
    with pytest.raises(SchedulingIntoPast):
        s.schedule(9, EventKind.COMPUTE_DONE)


def test_empty_queue_quiesces():
    s = Scheduler()
    assert s.run_until() == []
    assert s.now == 0


def test_run_until_stops_at_end():
    s = Scheduler()
    s.schedule(5, EventKind.COMPUTE_DONE)
    s.schedule(50, EventKind.COMPUTE_DONE)
    assert len(s.run_until(10)) == 1
    assert s.now == 10 and s.pending == 1


def test_uplink_delivery_time():
    s = Scheduler()
    net = Network(s)
    net.add_link(Link("M1", "BS1", up_latency_ms=50, up_bytes_per_ms=1))
    ev = net.send(req())
    assert ev.fire_at == 50 + 28


def test_downlink_delivery_time():
    s = Scheduler()
    net = Network(s)
    net.add_link(Link("M1", "BS1", down_latency_ms=50, down_bytes_per_ms=8))
    assert net.send(reply()).fire_at == 50 + 8


def test_outage_defers_delivery():
    s = Scheduler()
    net = Network(s)
    net.add_link(Link("M1", "BS1", outage_windows=[(0, 1000)]))
    assert net.send(req()).fire_at == 1000


def test_fifo_per_direction():
    s = Scheduler()
    link = Link("M1", "BS1", up_latency_ms=10, up_bytes_per_ms=1)
    first = link.transmit(100, 0, "M1")
    second = link.transmit(1, 0, "M1")
    assert second >= first


def test_ceiling_division():
    link = Link("a", "b", up_latency_ms=0, up_bytes_per_ms=8)
    assert link.transfer_time(9, True) == 2


@pytest.mark.parametrize("kw", [{"up_bytes_per_ms": 0}, {"down_bytes_per_ms": -1}, {"up_latency_ms": -1}])
def test_bad_link_config(kw):
    with pytest.raises(LinkConfigError):
        Link("a", "b", **kw)


def test_empty_outage_window_rejected():
    with pytest.raises(LinkConfigError):
        merge_windows([(5, 5)])


def test_merge_windows():
    assert merge_windows([(10, 20), (0, 5), (15, 30)]) == [(0, 5), (10, 30)]


def test_adjacent_windows_chain():
    link = Link("a", "b", up_latency_ms=0, up_bytes_per_ms=1000, outage_windows=[(0, 10), (10, 20)])
    assert link.transmit(1, 0, "a") == 20


def test_missing_link_and_duplicate():
    net = Network(Scheduler())
    net.add_link(Link("a", "b"))
    with pytest.raises(LinkConfigError):
        net.add_link(Link("b", "a"))
    with pytest.raises(NoSuchLink):
        net.link("a", "c")
    with pytest.raises(NoSuchLink):
        net.link("a", "b").is_up("c")


def test_byte_counters():
    net = Network(Scheduler())
    link = net.add_link(Link("M1", "BS1"))
    net.send(req())
    net.send(reply())
    assert link.bytes_up == message_size_bytes(req()) and link.bytes_down == message_size_bytes(reply())
    assert net.bytes_sent == link.bytes_up + link.bytes_down
    assert (link.msgs_up, link.msgs_down) == (1, 1)
