"""Deterministic discrete-event engine with asymmetric, disconnectable links."""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .model import Message, Timestamp, message_size_bytes


class SimError(Exception):
    pass


class SchedulingIntoPast(SimError):
    pass


class NoSuchLink(SimError):
    pass


class LinkConfigError(SimError):
    pass


class EventKind(str, enum.Enum):
    MESSAGE_DELIVERY = "MessageDelivery"
    COMPUTE_DONE = "ComputeDone"
    CONNECTIVITY_CHANGE = "ConnectivityChange"
    CELL_MOVE = "CellMove"
    BROADCAST_TICK = "BroadcastTick"
    WORKLOAD_ARRIVAL = "WorkloadArrival"
    # same-tick commit requests at one coordinator are decided together
    COMMIT_BATCH = "CommitBatch"


@dataclass(eq=False)
class SimEvent:
    fire_at: Timestamp
    seq: int
    kind: EventKind
    actor: str = ""
    payload: Any = None
    action: Optional[Callable[["SimEvent"], None]] = field(default=None, repr=False)
    scheduled_at: Timestamp = 0


class Scheduler:
    def __init__(self):
        self.now: Timestamp = 0
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = itertools.count()

    def schedule(
        self,
        fire_at: Timestamp,
        kind: EventKind,
        actor: str = "",
        payload: Any = None,
        action: Optional[Callable[[SimEvent], None]] = None,
    ) -> SimEvent:
        if fire_at < self.now:
            raise SchedulingIntoPast(f"{kind.value} at {fire_at} < now {self.now}")
        ev = SimEvent(fire_at, next(self._seq), kind, actor, payload, action, self.now)
        heapq.heappush(self._queue, (fire_at, ev.seq, ev))
        return ev

    @property
    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, end: Optional[Timestamp] = None) -> list[SimEvent]:
        """Fire events in (fire_at, seq) order up to ``end`` inclusive, or to
        quiescence when ``end`` is None.  Returns the fired events."""
        fired = []
        q = self._queue
        while q and (end is None or q[0][0] <= end):
            fire_at, _, ev = heapq.heappop(q)
            self.now = fire_at
            fired.append(ev)
            if ev.action is not None:
                ev.action(ev)
        if end is not None and end > self.now:
            self.now = end
        return fired


def merge_windows(windows) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for start, end in sorted((int(s), int(e)) for s, e in windows):
        if end <= start:
            raise LinkConfigError(f"empty outage window [{start}, {end})")
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


@dataclass
class Link:
    """Point-to-point link.  ``a`` is the uplink side: traffic a->b uses the
    up parameters, b->a the down parameters.  Each direction is FIFO."""

    a: str
    b: str
    up_latency_ms: int = 50
    down_latency_ms: int = 20
    up_bytes_per_ms: float = 1
    down_bytes_per_ms: float = 8
    outage_windows: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.up_bytes_per_ms <= 0 or self.down_bytes_per_ms <= 0:
            raise LinkConfigError(f"link {self.a}-{self.b}: transfer rates must be positive")
        if self.up_latency_ms < 0 or self.down_latency_ms < 0:
            raise LinkConfigError(f"link {self.a}-{self.b}: negative latency")
        self.outage_windows = merge_windows(self.outage_windows)
        self.bytes_up = self.bytes_down = 0
        self.msgs_up = self.msgs_down = 0
        self._tail = {True: 0, False: 0}

    def is_up(self, sender: str) -> bool:
        if sender == self.a:
            return True
        if sender == self.b:
            return False
        raise NoSuchLink(f"{sender} is not an endpoint of {self.a}-{self.b}")

    def transfer_time(self, size: int, up: bool) -> int:
        latency, rate = (
            (self.up_latency_ms, self.up_bytes_per_ms) if up
            else (self.down_latency_ms, self.down_bytes_per_ms)
        )
        # ceiling division, exact for integer rates
        return latency + int(-(-size // rate))

    def defer_past_outage(self, t: Timestamp) -> Timestamp:
        for start, end in self.outage_windows:
            if start <= t < end:
                t = end
        return t

    def transmit(self, size: int, now: Timestamp, sender: str) -> Timestamp:
        up = self.is_up(sender)
        t = max(now + self.transfer_time(size, up), self._tail[up])
        t = self.defer_past_outage(t)
        self._tail[up] = t
        if up:
            self.bytes_up += size
            self.msgs_up += 1
        else:
            self.bytes_down += size
            self.msgs_down += 1
        return t


class Network:
    def __init__(self, scheduler: Scheduler):
        self.scheduler = scheduler
        self.links: dict[frozenset, Link] = {}
        self.bytes_sent = 0
        self.messages_sent = 0

    def add_link(self, link: Link) -> Link:
        key = frozenset((link.a, link.b))
        if key in self.links:
            raise LinkConfigError(f"duplicate link {link.a}-{link.b}")
        self.links[key] = link
        return link

    def link(self, x: str, y: str) -> Link:
        try:
            return self.links[frozenset((x, y))]
        except KeyError:
            raise NoSuchLink(f"{x}-{y}") from None

    def send(
        self,
        msg: Message,
        src: Optional[str] = None,
        dst: Optional[str] = None,
        action: Optional[Callable[[SimEvent], None]] = None,
    ) -> SimEvent:
        """Put ``msg`` on the src->dst hop (defaults: its own sender and
        receiver) and schedule its delivery at dst."""
        src = msg.sender if src is None else src
        dst = msg.receiver if dst is None else dst
        link = self.link(src, dst)
        size = message_size_bytes(msg)
        now = self.scheduler.now
        at = link.transmit(size, now, src)
        self.bytes_sent += size
        self.messages_sent += 1
        return self.scheduler.schedule(at, EventKind.MESSAGE_DELIVERY, dst, (src, msg), action)
