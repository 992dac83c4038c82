"""Trace-reading helpers shared by the end-to-end tests."""

from mobocc.model import TxnState


def commits(result):
    """[(site, {item string: value written})] in commit order."""
    out = []
    for rec in result.records:
        if rec["kind"] == "commit":
            d = rec["detail"]
            out.append((d["site"], {f"{w[0]}[{w[1]}].{w[2]}": w[5] for w in d["writes"]}))
    return out


def deliveries(result, kind=None, instance=None):
    return [
        r for r in result.records
        if r["kind"] == "MessageDelivery"
        and (kind is None or r["detail"]["msg"] == kind)
        and (instance is None or r["instance"] == instance)
    ]


def uplink_between_restart_and_commit(result):
    """Uplink messages an instance sent after a restart and before its next
    CommitRequest (or its Withdraw, if it starved) left the host.  Derived
    from the trace alone."""
    bad = []
    restarted = set()
    for r in result.records:
        if r["kind"] == "restart":
            restarted.add(r["instance"])
        elif r["kind"] in ("local_commit", "starved"):
            restarted.discard(r["instance"])
        elif (r["kind"] == "MessageDelivery" and r["detail"]["hop"][0].startswith("M")
              and r["instance"] in restarted and r["detail"]["msg"] not in ("CommitRequest", "HandoffTransfer")):
            bad.append(r)
    return bad


def table_matches_unfinished(sim):
    rows = {row.instance_id for c in sim.coordinators.values() for row in c.table}
    open_ = {
        i.instance_id for i in sim.instances()
        if i.state not in (TxnState.GLOBALLY_COMMITTED, TxnState.ABORTED, TxnState.STARVED)
        and i.state is not TxnState.REQUESTED
    }
    return rows == open_
