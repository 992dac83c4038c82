"""Experiment driver: single runs, strategy comparisons and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .config import InvalidSpec, WorkloadSpec
from .coordinator import Strategy
from .metrics import TABLE_COLUMNS, RunMetrics, align_windows, table_row
from .simulation import SimResult, simulate
from .trace import write_trace
from .verify import Verdict


@dataclass
class RunRecord:
    spec_name: str
    metrics: RunMetrics
    verdict: Verdict

    def row(self) -> dict:
        d = {"scenario": self.spec_name}
        d.update(self.metrics.as_dict())
        d["verdict_error"] = self.verdict.error
        return d


def run_scenario(spec: WorkloadSpec, trace_path: Union[str, Path, None] = None) -> SimResult:
    result = simulate(spec)
    if trace_path is not None:
        write_trace(result.records, trace_path)
    return result


def _run_one(spec: WorkloadSpec) -> RunRecord:
    r = simulate(spec)
    return RunRecord(spec.name, r.metrics, r.verdict)


def run_many(specs: Sequence[WorkloadSpec], workers: int = 1) -> list[RunRecord]:
    """Run specs independently; output order always follows input order."""
    if workers <= 1 or len(specs) < 2:
        return [_run_one(s) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, specs, chunksize=max(1, len(specs) // (workers * 4))))


def parse_strategies(values: Iterable[Union[str, Strategy]]) -> list[Strategy]:
    out = []
    for v in values:
        s = v if isinstance(v, Strategy) else Strategy.parse(v)
        if s not in out:
            out.append(s)
    return out


def compare_strategies(
    spec: WorkloadSpec, strategies: Iterable[Union[str, Strategy]], workers: int = 1
) -> list[RunRecord]:
    """Same workload and seed under each strategy."""
    strategies = parse_strategies(strategies)
    if len(strategies) < 2:
        raise InvalidSpec("a comparison needs at least two distinct strategies")
    records = run_many([spec.with_(strategy=s) for s in strategies], workers)
    align_windows([r.metrics for r in records])
    return records


def parse_range(text: str) -> list[int]:
    """``"2..64"`` doubles from 2 to 64, ``"2..64:+2"`` steps by 2,
    ``"8,16,32"`` is taken literally."""
    text = text.strip()
    m = re.fullmatch(r"(\d+)\.\.(\d+)(?::\+(\d+))?", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if lo < 1 or hi < lo:
            raise InvalidSpec(f"bad range {text!r}")
        if m.group(3):
            return list(range(lo, hi + 1, int(m.group(3))))
        out = []
        v = lo
        while v <= hi:
            out.append(v)
            v *= 2
        return out
    try:
        values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InvalidSpec(f"bad range {text!r}") from None
    if not values or min(values) < 1:
        raise InvalidSpec(f"bad range {text!r}")
    return values


def sweep(
    spec: WorkloadSpec,
    hosts: Sequence[int],
    seeds: Sequence[int],
    strategies: Optional[Iterable[Union[str, Strategy]]] = None,
    workers: int = 1,
) -> list[RunRecord]:
    strategies = parse_strategies(strategies) if strategies else [spec.strategy]
    specs = [
        spec.with_(hosts=h, seed=s, strategy=st)
        for h in hosts for s in seeds for st in strategies
    ]
    records = run_many(specs, workers)
    if len(strategies) > 1:
        k = len(strategies)
        for i in range(0, len(records), k):
            align_windows([r.metrics for r in records[i:i + k]])
    return records


def throughput_ratio(records: Sequence[RunRecord], num: Strategy, den: Strategy) -> Optional[float]:
    by = {r.metrics.strategy: r.metrics for r in records}
    a, b = by.get(num.label), by.get(den.label)
    if a is None or b is None or b.throughput_per_s == 0:
        return None
    return a.throughput_per_s / b.throughput_per_s


def to_csv(records: Sequence[RunRecord], columns=TABLE_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scenario",) + tuple(columns))
    for r in records:
        w.writerow([r.spec_name] + table_row(r.metrics, columns))
    return buf.getvalue()


def to_json(records: Sequence[RunRecord]) -> str:
    return json.dumps([r.row() for r in records], indent=2, sort_keys=True) + "\n"


def write_table(records: Sequence[RunRecord], path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    text = to_json(records) if fmt == "json" else to_csv(records)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
