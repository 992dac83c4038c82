"""JSON-lines trace files.

A trace starts with a ``load`` record (initial relations and the transaction
catalog), carries every ``commit`` with its read versions and before/after
images, and ends with a ``final`` record holding the DBS state.  That is
enough to re-verify a run offline without re-simulating it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Union

from .model import DataItemId, TransactionType, TxnParams, VersionedValue, site_of
from .store import CommitLogEntry
from .verify import Verdict, verify_history


class TraceError(ValueError):
    pass


def dump_record(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"))


def write_trace(records: Iterable[dict], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dump_record(rec))
            fh.write("\n")
    return path


def read_trace(path: Union[str, Path]) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(f"{path}:{lineno}: {exc.msg}") from None


def _item(parts) -> DataItemId:
    return DataItemId(parts[0], parts[1], parts[2])


def history_from_records(records: Iterable[dict]):
    """Rebuild (initial values, final values, commit log, catalog)."""
    load = final = None
    log: list[CommitLogEntry] = []
    for rec in records:
        kind = rec.get("kind")
        d = rec.get("detail") or {}
        if kind == "load":
            load = d
        elif kind == "final":
            final = d
        elif kind == "commit":
            params = d.get("params")
            log.append(CommitLogEntry(
                commit_seq=d["seq"],
                instance_id=rec["instance"],
                read_versions={_item(r[:3]): r[3] for r in d["reads"]},
                writes={_item(w[:3]): (VersionedValue(w[3], w[4]), w[5]) for w in d["writes"]},
                timestamp=rec["time_ms"],
                txn_type_id=d.get("txn"),
                params=TxnParams(*params) if params is not None else None,
                site=site_of(d["site"]) if d.get("site") else None,
            ))
    if load is None:
        raise TraceError("trace has no load record")
    if final is None:
        raise TraceError("trace has no final record (truncated run?)")
    initial = {}
    for rel in load["relations"]:
        schema = rel["schema"]
        for row in rel["rows"]:
            for attr, value in zip(schema, row):
                initial[DataItemId(rel["name"], row[0], attr)] = value
    catalog = {
        t["id"]: TransactionType(t["id"], t["name"], t["relation"], tuple(t["items"]))
        for t in load["catalog"]
    }
    final_values = {_item(s[:3]): s[3] for s in final["state"]}
    log.sort(key=lambda e: e.commit_seq)
    return initial, final_values, log, catalog


def verify_trace(path: Union[str, Path]) -> Verdict:
    initial, final, log, catalog = history_from_records(read_trace(path))
    return verify_history(initial, final, log, catalog)
