"""Deterministic discrete-event core.

The virtual clock is kept in integer microseconds so timestamp equality is
exact; repeated addition of a fixed delay lands on the same tick on every
platform. Events are dispatched in (time, seq) order where seq is the global
scheduling order, so ties are reproducible without per-kind priority rules.
"""

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, TextIO

US_PER_S = 1_000_000


def to_us(seconds: float | int) -> int:
    """Convert seconds to the nearest integer microsecond tick."""
    return round(seconds * US_PER_S)


def to_s(us: int) -> float:
    return us / US_PER_S


def format_s(us: int) -> str:
    # exact decimal rendering, no float round-trip
    sign = "-" if us < 0 else ""
    us = abs(us)
    return f"{sign}{us // US_PER_S}.{us % US_PER_S:06d}"


class EventKind(Enum):
    JOB_ARRIVAL = "JobArrival"
    TASK_START = "TaskStart"
    TASK_FINISH = "TaskFinish"
    SERVER_PROVISIONED = "ServerProvisioned"
    SERVER_DRAIN_COMPLETE = "ServerDrainComplete"
    SERVER_REVOCATION_WARNING = "ServerRevocationWarning"
    SERVER_REVOKED = "ServerRevoked"
    SIM_END = "SimEnd"


@dataclass(frozen=True)
class Event:
    time_us: int
    seq: int
    kind: EventKind
    job_id: Optional[int] = None
    task_id: Optional[int] = None
    server_id: Optional[int] = None


class EventInPastError(RuntimeError):
    """An event was scheduled before the current clock. Always a bug."""


@dataclass
class RunSummary:
    dispatched: int
    final_time_us: int
    by_kind: dict = field(default_factory=dict)


class Engine:
    """Priority-queue event loop with a single owned RNG.

    All randomness in a run must flow through ``self.rng`` so a seed fixes
    the whole trajectory.
    """

    def __init__(self, seed: int = 0, event_log: Optional[TextIO] = None):
        self.now_us = 0
        self.rng = random.Random(seed)
        self.seed = seed
        self.event_log = event_log
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._handlers: dict[EventKind, Callable[[Event], None]] = {}
        self._post_dispatch: list[Callable[[Event], None]] = []
        self._cancelled: set[int] = set()

    def register(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self._handlers[kind] = handler

    def add_post_dispatch(self, hook: Callable[[Event], None]) -> None:
        """Hook called after every dispatched event (used for live checks)."""
        self._post_dispatch.append(hook)

    def schedule(
        self,
        time_us: int,
        kind: EventKind,
        job_id: Optional[int] = None,
        task_id: Optional[int] = None,
        server_id: Optional[int] = None,
    ) -> Event:
        if time_us < self.now_us:
            raise EventInPastError(
                f"{kind.value} scheduled at t={format_s(time_us)} "
                f"with clock at t={format_s(self.now_us)}"
            )
        ev = Event(time_us, self._seq, kind, job_id, task_id, server_id)
        self._seq += 1
        heapq.heappush(self._heap, (time_us, ev.seq, ev))
        return ev

    def pending(self) -> int:
        return len(self._heap) - len(self._cancelled)

    def cancel(self, ev: Event) -> None:
        """Drop a scheduled event. It is skipped silently at pop time, so
        the clock never advances for it."""
        self._cancelled.add(ev.seq)

    def run(self, until_us: Optional[int] = None) -> RunSummary:
        """Dispatch events in order until the queue empties.

        With ``until_us`` set, stops before the first event later than it.
        The clock never moves past the last dispatched event; an empty queue
        leaves it unchanged.
        """
        dispatched = 0
        by_kind: dict[EventKind, int] = {}
        while self._heap:
            if until_us is not None and self._heap[0][0] > until_us:
                break
            _, _, ev = heapq.heappop(self._heap)
            if ev.seq in self._cancelled:
                self._cancelled.discard(ev.seq)
                continue
            self.now_us = ev.time_us
            if self.event_log is not None:
                self._log(ev)
            handler = self._handlers.get(ev.kind)
            if handler is not None:
                handler(ev)
            dispatched += 1
            by_kind[ev.kind] = by_kind.get(ev.kind, 0) + 1
            for hook in self._post_dispatch:
                hook(ev)
        return RunSummary(dispatched, self.now_us, by_kind)

    def _log(self, ev: Event) -> None:
        parts = [format_s(ev.time_us), str(ev.seq), ev.kind.value]
        if ev.job_id is not None:
            parts.append(f"job={ev.job_id}")
        if ev.task_id is not None:
            parts.append(f"task={ev.task_id}")
        if ev.server_id is not None:
            parts.append(f"server={ev.server_id}")
        self.event_log.write(" ".join(parts) + "\n")
