"""Named built-in scenarios.

The banking cases use accounts 101-103 and two joint holders of account 103:
M1 deposits 1000, M2 withdraws 500.  Start times are chosen so the
coordinator records M1's request at 605000 ms and M2's at 610000 ms.
"""

from __future__ import annotations

from typing import Callable, Optional

from .config import HostOverride, LinkParams, WorkloadArrival, WorkloadSpec, generated_accounts
from .model import TxnParams, message_size_bytes, DataRequest

M1_ARRIVAL = 605_000
M2_ARRIVAL = 610_000


def request_transit(link: LinkParams) -> int:
    size = message_size_bytes(DataRequest(sender="M0", receiver="BS0", instance_id=0, txn_type_id="", row_key=0))
    return link.up_latency_ms + int(-(-size // link.up_bytes_per_ms))


def _banking(name: str, m1_delay: int, m2_delay: int, cells: int = 1, **kw) -> WorkloadSpec:
    link = LinkParams()
    lead = request_transit(link)
    script = [
        WorkloadArrival(M1_ARRIVAL - lead, 1, "T1", TxnParams(103, 1000)),
        WorkloadArrival(M2_ARRIVAL - lead, 2, "T2", TxnParams(103, 500)),
    ]
    overrides = [HostOverride(1, compute_delay_ms=m1_delay), HostOverride(2, compute_delay_ms=m2_delay)]
    for o in kw.pop("extra_overrides", []):
        overrides.append(o)
    return WorkloadSpec(
        name=name, hosts=2, cells=cells, link=link, script=script,
        host_overrides=overrides, **kw,
    )


def banking_case_i(seed: int = 0) -> WorkloadSpec:
    """M1 finishes its deposit while M2 is still executing."""
    return _banking("banking-case-i", 8_000, 20_000, seed=seed)


def banking_case_ii(seed: int = 0) -> WorkloadSpec:
    """M2 starts later but finishes its withdrawal first."""
    return _banking("banking-case-ii", 20_000, 2_000, seed=seed)


def banking_case_iii(seed: int = 0) -> WorkloadSpec:
    """Both commit requests reach the coordinator in the same millisecond."""
    return _banking("banking-case-iii", 8_000, 3_000, seed=seed)


def handoff(seed: int = 0) -> WorkloadSpec:
    """banking-case-i over two cells: M2 moves from cell 1 to cell 2 while its
    withdrawal is executing, so both the restart values and its commit
    travel between base stations."""
    return _banking(
        "handoff", 8_000, 20_000, cells=2, seed=seed,
        extra_overrides=[HostOverride(2, cell=1, moves=[(611_000, 2)])],
    )


DISCONNECT_WINDOW = (606_000, 640_000)


def disconnect(seed: int = 0) -> WorkloadSpec:
    """M1 goes offline during its deposit and commits locally while
    disconnected.  The seed decides when M2's competing withdrawal starts,
    i.e. whether a conflicting commit lands before M1 reconnects."""
    from .workload import stream

    rng = stream(seed, "disconnect")
    m2_arrival = rng.randrange(610_000, 680_000)
    link = LinkParams()
    lead = request_transit(link)
    script = [
        WorkloadArrival(M1_ARRIVAL - lead, 1, "T1", TxnParams(103, 1000)),
        WorkloadArrival(m2_arrival - lead, 2, "T2", TxnParams(103, 500)),
    ]
    return WorkloadSpec(
        name="disconnect", seed=seed, hosts=2, link=link, script=script,
        host_overrides=[
            HostOverride(1, compute_delay_ms=4_000, outages=[DISCONNECT_WINDOW]),
            HostOverride(2, compute_delay_ms=2_000),
        ],
    )


def hotspot(seed: int = 0, hosts: int = 16) -> WorkloadSpec:
    """Generated contention workload: 80% of requests hit one account."""
    return WorkloadSpec(
        name="hotspot", seed=seed, hosts=hosts, cells=2,
        relations=generated_accounts(10, 10_000),
        compute_delay_ms=(500, 4_000),
        row_distribution="hotspot", hot_keys=1, skew=0.8,
        mean_interarrival_ms=300, duration_ms=12_000,
    )


BUILTINS: dict[str, Callable[..., WorkloadSpec]] = {
    "banking-case-i": banking_case_i,
    "banking-case-ii": banking_case_ii,
    "banking-case-iii": banking_case_iii,
    "handoff": handoff,
    "disconnect": disconnect,
    "hotspot": hotspot,
}


def builtin(name: str, seed: Optional[int] = None) -> WorkloadSpec:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(BUILTINS)}") from None
    return factory() if seed is None else factory(seed)
