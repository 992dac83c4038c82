"""The fixed-host database server: versioned relations plus a commit log."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

from .model import DataItemId, SiteId, Timestamp, TxnParams, VersionedValue


class StoreError(Exception):
    pass


class DuplicateRelation(StoreError):
    pass


class DuplicateRowKey(StoreError):
    pass


class UnknownDataItem(StoreError):
    pass


@dataclass
class Relation:
    """A table whose first schema attribute is the primary key."""

    name: str
    schema: tuple[str, ...]
    rows: dict[Any, dict[str, VersionedValue]] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, name: str, schema: Sequence[str], rows: Iterable[Sequence[int]]) -> "Relation":
        rel = cls(name, tuple(schema))
        for values in rows:
            if len(values) != len(rel.schema):
                raise StoreError(f"{name}: row {values!r} does not match schema {rel.schema}")
            key = values[0]
            if key in rel.rows:
                raise DuplicateRowKey(f"{name}: duplicate row key {key!r}")
            rel.rows[key] = {a: VersionedValue(int(v), 0) for a, v in zip(rel.schema, values)}
        return rel

    def plain_rows(self) -> list[list[int]]:
        return [[self.rows[k][a].value for a in self.schema] for k in sorted(self.rows)]


@dataclass(frozen=True)
class CommitLogEntry:
    commit_seq: int
    instance_id: int
    read_versions: Mapping[DataItemId, int]
    # item -> (value/version it replaced, value written)
    writes: Mapping[DataItemId, tuple[VersionedValue, int]]
    timestamp: Timestamp
    txn_type_id: Optional[str] = None
    params: Optional[TxnParams] = None
    site: Optional[SiteId] = None


class CommitLog:
    def __init__(self, entries: Iterable[CommitLogEntry] = ()):
        self.entries: list[CommitLogEntry] = []
        for e in entries:
            self.append(e)

    def append(self, entry: CommitLogEntry) -> None:
        expected = len(self.entries) + 1
        if entry.commit_seq != expected:
            raise StoreError(f"commit_seq {entry.commit_seq} breaks sequence (expected {expected})")
        self.entries.append(entry)

    def __iter__(self) -> Iterator[CommitLogEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True)
class StoreSnapshot:
    relations: dict[str, Relation]
    log_entries: tuple[CommitLogEntry, ...]


def _copy_relations(relations: Mapping[str, Relation]) -> dict[str, Relation]:
    return {
        name: Relation(rel.name, rel.schema, {k: dict(row) for k, row in rel.rows.items()})
        for name, rel in relations.items()
    }


class Store:
    """Authoritative database.  Every write bumps the item's version to the
    commit_seq that produced it; read-only commits still take a commit_seq."""

    def __init__(self):
        self.relations: dict[str, Relation] = {}
        self.log = CommitLog()

    @classmethod
    def load_initial(cls, relations: Iterable[Relation]) -> "Store":
        store = cls()
        for rel in relations:
            if rel.name in store.relations:
                raise DuplicateRelation(rel.name)
            store.relations[rel.name] = Relation(
                rel.name,
                tuple(rel.schema),
                {k: {a: VersionedValue(vv.value, 0) for a, vv in row.items()} for k, row in rel.rows.items()},
            )
        return store

    def _cell(self, item: DataItemId) -> dict[str, VersionedValue]:
        try:
            row = self.relations[item.relation].rows[item.row_key]
        except KeyError:
            raise UnknownDataItem(str(item)) from None
        if item.attribute not in row:
            raise UnknownDataItem(str(item))
        return row

    def read(self, item: DataItemId) -> VersionedValue:
        return self._cell(item)[item.attribute]

    def has_row(self, relation: str, row_key) -> bool:
        rel = self.relations.get(relation)
        return rel is not None and row_key in rel.rows

    def extract_fragment(self, items: Iterable[DataItemId]) -> dict[DataItemId, VersionedValue]:
        return {item: self.read(item) for item in sorted(items)}

    def latest_version(self, item: DataItemId) -> int:
        return self.read(item).version

    def apply_commit(
        self,
        instance_id: int,
        read_versions: Mapping[DataItemId, int],
        write_set: Mapping[DataItemId, int],
        now: Timestamp,
        *,
        txn_type_id: Optional[str] = None,
        params: Optional[TxnParams] = None,
        site: Optional[SiteId] = None,
    ) -> int:
        # validate every target before mutating anything
        for item in write_set:
            self._cell(item)
        seq = len(self.log) + 1
        writes = {}
        for item in sorted(write_set):
            row = self._cell(item)
            writes[item] = (row[item.attribute], int(write_set[item]))
            row[item.attribute] = VersionedValue(int(write_set[item]), seq)
        self.log.append(
            CommitLogEntry(
                commit_seq=seq,
                instance_id=instance_id,
                read_versions=dict(read_versions),
                writes=writes,
                timestamp=now,
                txn_type_id=txn_type_id,
                params=params,
                site=site,
            )
        )
        return seq

    def items(self) -> Iterator[DataItemId]:
        for rname in sorted(self.relations):
            rel = self.relations[rname]
            for key in sorted(rel.rows):
                for attr in rel.schema:
                    yield DataItemId(rname, key, attr)

    def state(self) -> dict[DataItemId, VersionedValue]:
        return {item: self.read(item) for item in self.items()}

    def snapshot(self) -> StoreSnapshot:
        return StoreSnapshot(_copy_relations(self.relations), tuple(self.log.entries))

    def restore(self, snap: StoreSnapshot) -> "Store":
        self.relations = _copy_relations(snap.relations)
        self.log = CommitLog(snap.log_entries)
        return self


def replay_log(initial: StoreSnapshot, log: Iterable[CommitLogEntry]) -> Store:
    """Re-apply logged after-images, in order, over an initial snapshot."""
    store = Store().restore(StoreSnapshot(initial.relations, ()))
    for entry in log:
        store.apply_commit(
            entry.instance_id,
            entry.read_versions,
            {item: after for item, (_, after) in entry.writes.items()},
            entry.timestamp,
            txn_type_id=entry.txn_type_id,
            params=entry.params,
            site=entry.site,
        )
    return store
