from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass
from typing import Optional


def percentile(values: list[float], q: float) -> Optional[float]:
    """Nearest-rank percentile; None for an empty sample."""
    if not values:
        return None
    ordered = sorted(values)
    rank = max(1, math.ceil(q / 100 * len(ordered)))
    return float(ordered[rank - 1])


@dataclass
class RunMetrics:
    strategy: str
    seed: int
    hosts: int
    transactions: int
    committed: int = 0
    restarted: int = 0
    aborted: int = 0
    locally_failed: int = 0
    starved: int = 0
    stale_reports: int = 0
    redundant_reports: int = 0
    conflict_notices: int = 0
    dropped_arrivals: int = 0
    unfinished: int = 0
    uplink_messages: int = 0
    downlink_messages: int = 0
    backbone_messages: int = 0
    uplink_bytes: int = 0
    downlink_bytes: int = 0
    backbone_bytes: int = 0
    restart_uplink_messages: int = 0
    # acks for an already restarted attempt; nonzero only without validation
    superseded_acks: int = 0
    latency_mean_ms: Optional[float] = None
    latency_median_ms: Optional[float] = None
    latency_p95_ms: Optional[float] = None
    makespan_ms: int = 0
    # throughput is commits over this window; comparisons widen it to the
    # longest makespan in the group so every strategy is judged on equal time
    window_ms: int = 0
    throughput_per_s: float = 0.0
    serializable: Optional[bool] = None

    @property
    def terminal(self) -> int:
        return self.committed + self.starved + self.locally_failed + self.aborted

    @property
    def total_bytes(self) -> int:
        return self.uplink_bytes + self.downlink_bytes + self.backbone_bytes

    def set_window(self, window_ms: int) -> None:
        if window_ms < self.makespan_ms:
            raise ValueError(f"window {window_ms} ms shorter than makespan {self.makespan_ms} ms")
        self.window_ms = window_ms
        self.throughput_per_s = self.committed / (window_ms / 1000) if window_ms else 0.0

    def uplink_per_restart(self) -> float:
        return self.restart_uplink_messages / self.restarted if self.restarted else 0.0

    def as_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def latency_summary(latencies: list[int]) -> tuple[Optional[float], Optional[float], Optional[float]]:
        if not latencies:
            return None, None, None
        return (
            float(statistics.fmean(latencies)),
            float(statistics.median(latencies)),
            percentile(latencies, 95),
        )


TABLE_COLUMNS = (
    "strategy", "seed", "hosts", "transactions", "committed", "restarted", "aborted",
    "locally_failed", "starved", "uplink_messages", "downlink_messages", "backbone_messages",
    "uplink_bytes", "downlink_bytes", "restart_uplink_messages", "latency_mean_ms",
    "latency_p95_ms", "makespan_ms", "window_ms", "throughput_per_s", "serializable",
)


def align_windows(group) -> int:
    """Put a group of runs of one workload on a common measurement window."""
    window = max((m.makespan_ms for m in group), default=0)
    for m in group:
        m.set_window(window)
    return window


def table_row(m: RunMetrics, columns=TABLE_COLUMNS) -> list:
    d = m.as_dict()
    out = []
    for c in columns:
        v = d[c]
        if isinstance(v, float):
            v = round(v, 4)
        out.append("" if v is None else v)
    return out
