"""Post-run audit built only from the commit log.

Three independent checks must agree on every run: the conflict graph is
acyclic, commit order is one of its topological orders, and re-executing the
committed transactions one after another from the initial database reproduces
the final database.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .host import LocalFailure, run_logic
from .model import DataItemId, TransactionType, TxnParams, VersionedValue
from .store import CommitLogEntry


class VerifyError(Exception):
    pass


class InconsistentHistory(VerifyError):
    pass


class CycleFound(VerifyError):
    def __init__(self, cycle: list[int]):
        super().__init__("conflict cycle: " + " -> ".join(map(str, cycle + cycle[:1])))
        self.cycle = cycle


class ReplayDivergence(VerifyError):
    def __init__(self, item: DataItemId, expected, actual):
        super().__init__(f"{item}: serial replay gives {expected!r}, database holds {actual!r}")
        self.item = item
        self.expected = expected
        self.actual = actual


@dataclass(frozen=True)
class HistoryEntry:
    commit_seq: int
    instance_id: int
    reads: Mapping[DataItemId, int]
    # item -> (version overwritten, value written); the written version is commit_seq
    writes: Mapping[DataItemId, tuple[int, int]]
    txn_type_id: Optional[str] = None
    params: Optional[TxnParams] = None


@dataclass
class CommittedHistory:
    entries: list[HistoryEntry] = field(default_factory=list)

    @classmethod
    def from_log(cls, log: Iterable[CommitLogEntry]) -> "CommittedHistory":
        entries = [
            HistoryEntry(
                e.commit_seq,
                e.instance_id,
                dict(e.read_versions),
                {item: (before.version, after) for item, (before, after) in e.writes.items()},
                e.txn_type_id,
                e.params,
            )
            for e in log
        ]
        entries.sort(key=lambda h: h.commit_seq)
        return cls(entries)

    def seq_of(self) -> dict[int, int]:
        return {h.instance_id: h.commit_seq for h in self.entries}


@dataclass
class ConflictGraph:
    nodes: list[int]
    # (from, to) -> dependency kinds among {"wr", "ww", "rw"}
    edges: dict[tuple[int, int], set[str]]
    commit_seq: dict[int, int]

    def __post_init__(self):
        self._succ: dict[int, list[int]] = {n: [] for n in self.nodes}
        for i, j in sorted(self.edges):
            self._succ.setdefault(i, []).append(j)

    def successors(self, node: int) -> list[int]:
        return self._succ.get(node, [])


def build_conflict_graph(history: CommittedHistory) -> ConflictGraph:
    produced: dict[tuple[DataItemId, int], tuple[int, int]] = {}
    seen: set[int] = set()
    for h in history.entries:
        if h.commit_seq in seen:
            raise InconsistentHistory(f"commit_seq {h.commit_seq} used twice")
        seen.add(h.commit_seq)
        for item in h.writes:
            produced[(item, h.commit_seq)] = (h.instance_id, h.commit_seq)

    def writer(item, version, reader_seq):
        if version == 0:
            return None
        w = produced.get((item, version))
        if w is None or w[1] >= reader_seq:
            raise InconsistentHistory(f"commit {reader_seq} saw {item}@v{version}, which no earlier commit wrote")
        return w[0]

    overwriter: dict[tuple[DataItemId, int], int] = {}
    for h in history.entries:
        for item, (before, _) in h.writes.items():
            writer(item, before, h.commit_seq)
            if (item, before) in overwriter:
                raise InconsistentHistory(f"{item}@v{before} overwritten twice")
            overwriter[(item, before)] = h.instance_id

    edges: dict[tuple[int, int], set[str]] = {}

    def add(i, j, kind):
        if i is not None and i != j:
            edges.setdefault((i, j), set()).add(kind)

    for h in history.entries:
        j = h.instance_id
        for item, version in h.reads.items():
            add(writer(item, version, h.commit_seq), j, "wr")
            k = overwriter.get((item, version))
            if k is not None:
                add(j, k, "rw")
        for item, (before, _) in h.writes.items():
            add(writer(item, before, h.commit_seq), j, "ww")
    return ConflictGraph([h.instance_id for h in history.entries], edges, history.seq_of())


def _find_cycle(graph: ConflictGraph, among: set[int]) -> list[int]:
    adj = {n: [m for m in graph.successors(n) if m in among] for n in among}
    color: dict[int, int] = {}
    stack: list[int] = []

    def dfs(n):
        color[n] = 1
        stack.append(n)
        for m in adj[n]:
            if color.get(m) == 1:
                return stack[stack.index(m):]
            if m not in color:
                found = dfs(m)
                if found:
                    return found
        stack.pop()
        color[n] = 2
        return None

    for n in sorted(among, key=lambda x: graph.commit_seq.get(x, 0)):
        if n not in color:
            found = dfs(n)
            if found:
                return list(found)
    raise VerifyError("no cycle among remaining nodes")


def assert_serializable(graph: ConflictGraph) -> list[int]:
    """Return a serial order (commit order whenever it is valid); raise
    CycleFound otherwise."""
    indeg = {n: 0 for n in graph.nodes}
    for (_, j) in graph.edges:
        indeg[j] += 1
    rank = graph.commit_seq
    ready = [(rank.get(n, 0), n) for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, n = heapq.heappop(ready)
        order.append(n)
        for m in graph.successors(n):
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, (rank.get(m, 0), m))
    if len(order) != len(graph.nodes):
        raise CycleFound(_find_cycle(graph, set(graph.nodes) - set(order)))
    return order


def is_witness(graph: ConflictGraph, order: list[int]) -> bool:
    pos = {n: i for i, n in enumerate(order)}
    if set(pos) != set(graph.nodes):
        return False
    return all(pos[i] < pos[j] for (i, j) in graph.edges)


def commit_order(graph: ConflictGraph) -> list[int]:
    return sorted(graph.nodes, key=lambda n: graph.commit_seq[n])


def serial_replay_oracle(
    initial: Mapping[DataItemId, int],
    history: CommittedHistory,
    catalog: Mapping[str, TransactionType],
) -> dict[DataItemId, int]:
    """Run each committed transaction's logic alone, in commit order, on a
    private copy of the initial values."""
    state = dict(initial)
    for h in sorted(history.entries, key=lambda e: e.commit_seq):
        if h.txn_type_id is None or h.params is None:
            raise InconsistentHistory(f"commit {h.commit_seq} lacks the transaction type or arguments")
        ttype = catalog[h.txn_type_id]
        snap = {item: VersionedValue(state[item], 0) for item in ttype.data_items(h.params.row_key)}
        result = run_logic(ttype, snap, h.params)
        if isinstance(result, LocalFailure):
            item = ttype.data_items(h.params.row_key)[-1]
            raise ReplayDivergence(item, f"failure ({result.reason}) at commit {h.commit_seq}", state[item])
        state.update(result.write_set)
    return state


def check_replay(replayed: Mapping[DataItemId, int], final: Mapping[DataItemId, int]) -> None:
    for item in sorted(set(replayed) | set(final)):
        if replayed.get(item) != final.get(item):
            raise ReplayDivergence(item, replayed.get(item), final.get(item))


def stale_writes(history: CommittedHistory) -> list[tuple[int, DataItemId]]:
    """Writes whose committing transaction had read an older version than
    the one it replaced (lost updates)."""
    return [
        (h.commit_seq, item)
        for h in history.entries
        for item, (before, _) in sorted(h.writes.items())
        if item in h.reads and h.reads[item] != before
    ]


@dataclass
class Verdict:
    acyclic: bool
    commit_order_witness: bool
    replay_matches: bool
    commits: int
    lost_updates: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.acyclic and self.commit_order_witness and self.replay_matches

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "acyclic": self.acyclic,
            "commit_order_witness": self.commit_order_witness,
            "replay_matches": self.replay_matches,
            "commits": self.commits,
            "lost_updates": self.lost_updates,
            "error": self.error,
        }


def verify_history(
    initial: Mapping[DataItemId, int],
    final: Mapping[DataItemId, int],
    log: Iterable[CommitLogEntry],
    catalog: Mapping[str, TransactionType],
) -> Verdict:
    history = CommittedHistory.from_log(log)
    errors = []
    acyclic = witness = replay_ok = False
    try:
        graph = build_conflict_graph(history)
        try:
            assert_serializable(graph)
            acyclic = True
        except CycleFound as exc:
            errors.append(str(exc))
        witness = is_witness(graph, commit_order(graph))
        if not witness and acyclic:
            errors.append("commit order is not a topological order of the conflict graph")
    except InconsistentHistory as exc:
        errors.append(str(exc))
    try:
        check_replay(serial_replay_oracle(initial, history, catalog), final)
        replay_ok = True
    except (ReplayDivergence, InconsistentHistory) as exc:
        errors.append(str(exc))
    return Verdict(
        acyclic, witness, replay_ok, len(history.entries),
        lost_updates=len(stale_writes(history)),
        error="; ".join(errors) or None,
    )
