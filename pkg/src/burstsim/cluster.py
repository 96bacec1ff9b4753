"""Servers, partitions and in-flight work.

Each server runs one task at a time with a FIFO queue behind it. The
cluster keeps incremental counts of active servers and of active servers
holding at least one long task; ``recount_long_load`` recomputes both from
scratch and exists so live checks can catch any drift in the increments.

All bookkeeping is in integer microseconds.
"""

from dataclasses import dataclass
from collections import deque
from enum import Enum
from typing import NamedTuple, Optional

from .engine import Engine, EventKind
from .workload import JobClass


class Provenance(Enum):
    ON_DEMAND = "on_demand"
    TRANSIENT = "transient"


class Partition(Enum):
    GENERAL = "general"
    SHORT_ONLY = "short_only"


class ServerState(Enum):
    PROVISIONING = "provisioning"
    ACTIVE = "active"
    DRAINING = "draining"
    RETIRED = "retired"


class ClusterError(RuntimeError):
    pass


@dataclass
class Task:
    """A runnable unit. start_us is rewritten if the task is re-dispatched
    after a revocation, so it always holds the start that actually ran to
    completion."""

    job_id: int
    task_id: int
    job_class: JobClass
    submit_us: int
    duration_us: int
    start_us: Optional[int] = None
    finish_us: Optional[int] = None
    server_id: Optional[int] = None
    ever_started: bool = False


class Server:
    __slots__ = (
        "server_id", "provenance", "partition", "state", "queue", "running",
        "run_ends_us", "queued_work_us", "long_count", "start_pending",
        "requested_us", "activated_us", "retired_us", "revoked",
        "revocation_deadline_us",
    )

    def __init__(self, server_id: int, provenance: Provenance, partition: Partition,
                 state: ServerState, requested_us: int):
        self.server_id = server_id
        self.provenance = provenance
        self.partition = partition
        self.state = state
        self.queue: deque[Task] = deque()
        self.running: Optional[Task] = None
        self.run_ends_us = 0
        self.queued_work_us = 0
        self.long_count = 0
        self.start_pending = False
        self.requested_us = requested_us
        self.activated_us: Optional[int] = requested_us if state is ServerState.ACTIVE else None
        self.retired_us: Optional[int] = None
        self.revoked = False
        self.revocation_deadline_us: Optional[int] = None

    def remaining_work_us(self, now_us: int) -> int:
        rem = self.queued_work_us
        if self.running is not None:
            rem += self.run_ends_us - now_us
        return rem

    @property
    def has_long(self) -> bool:
        return self.long_count > 0

    def scan_long_count(self) -> int:
        n = sum(1 for t in self.queue if t.job_class is JobClass.LONG)
        if self.running is not None and self.running.job_class is JobClass.LONG:
            n += 1
        return n

    def scan_queued_work_us(self) -> int:
        return sum(t.duration_us for t in self.queue)

    @property
    def idle(self) -> bool:
        return self.running is None and not self.queue


class ServerRow(NamedTuple):
    server_id: int
    partition: Partition
    provenance: Provenance
    state: ServerState
    queue_len: int
    remaining_us: int
    has_long_task: bool


@dataclass(frozen=True)
class ClusterSnapshot:
    """Immutable view taken at one instant; schedulers work off this, never
    off live Server objects. Rows cover active and draining servers, sorted
    by server id."""

    time_us: int
    general: tuple[ServerRow, ...]
    short_only: tuple[ServerRow, ...]
    n_total: int
    n_long: int
    pending_transient: int
    active_transient: int
    draining_transient: int
    count_draining_in_total: bool


class Cluster:
    def __init__(self, engine: Engine, count_draining_in_total: bool = False):
        self.engine = engine
        self.count_draining_in_total = count_draining_in_total
        self.servers: dict[int, Server] = {}
        self.general_ids: list[int] = []
        self.short_on_demand_ids: list[int] = []
        self.transient_ids: list[int] = []
        self._next_id = 0
        # incremental counters, cross-checked by recount_long_load()
        self.n_total = 0
        self.n_long = 0
        self.pending_transient = 0
        self.active_transient = 0
        self.draining_transient = 0
        self.short_active = 0  # active servers in the short-only partition
        self.peak_short_active = 0

    # -- fleet construction -------------------------------------------------

    def add_on_demand(self, partition: Partition) -> Server:
        s = Server(self._next_id, Provenance.ON_DEMAND, partition, ServerState.ACTIVE, 0)
        self._next_id += 1
        self.servers[s.server_id] = s
        self.n_total += 1
        if partition is Partition.GENERAL:
            self.general_ids.append(s.server_id)
        else:
            self.short_on_demand_ids.append(s.server_id)
            self.short_active += 1
            self.peak_short_active = max(self.peak_short_active, self.short_active)
        return s

    def request_transient(self, now_us: int) -> Server:
        s = Server(self._next_id, Provenance.TRANSIENT, Partition.SHORT_ONLY,
                   ServerState.PROVISIONING, now_us)
        self._next_id += 1
        self.servers[s.server_id] = s
        self.transient_ids.append(s.server_id)
        self.pending_transient += 1
        return s

    def activate(self, server_id: int, now_us: int) -> Server:
        s = self.servers[server_id]
        if s.state is not ServerState.PROVISIONING:
            raise ClusterError(f"server {server_id} activated from state {s.state.value}")
        s.state = ServerState.ACTIVE
        s.activated_us = now_us
        self.pending_transient -= 1
        self.active_transient += 1
        self.n_total += 1
        self.short_active += 1
        self.peak_short_active = max(self.peak_short_active, self.short_active)
        return s

    # -- work flow -----------------------------------------------------------

    def enqueue(self, server_id: int, task: Task, now_us: int) -> None:
        s = self.servers[server_id]
        if s.state is not ServerState.ACTIVE:
            raise ClusterError(
                f"task {task.job_id}/{task.task_id} assigned to server {server_id} "
                f"in state {s.state.value}"
            )
        s.queue.append(task)
        s.queued_work_us += task.duration_us
        if task.job_class is JobClass.LONG:
            s.long_count += 1
            if s.long_count == 1 and self._counted(s):
                self.n_long += 1
        if s.running is None and not s.start_pending:
            s.start_pending = True
            self.engine.schedule(now_us, EventKind.TASK_START, job_id=task.job_id,
                                 task_id=task.task_id, server_id=server_id)

    def start_next(self, server_id: int, now_us: int) -> Task:
        s = self.servers[server_id]
        if not s.queue:
            raise ClusterError(f"server {server_id} has nothing to start")
        if s.running is not None:
            raise ClusterError(f"server {server_id} is already running a task")
        task = s.queue.popleft()
        s.queued_work_us -= task.duration_us
        s.running = task
        s.run_ends_us = now_us + task.duration_us
        s.start_pending = False
        task.start_us = now_us
        task.server_id = server_id
        self.engine.schedule(s.run_ends_us, EventKind.TASK_FINISH, job_id=task.job_id,
                             task_id=task.task_id, server_id=server_id)
        return task

    def finish_running(self, server_id: int, now_us: int) -> Task:
        s = self.servers[server_id]
        task = s.running
        if task is None:
            raise ClusterError(f"server {server_id} has no running task to finish")
        s.running = None
        task.finish_us = now_us
        if task.job_class is JobClass.LONG:
            s.long_count -= 1
            if s.long_count == 0 and self._counted(s):
                self.n_long -= 1
        if s.queue:
            s.start_pending = True
            nxt = s.queue[0]
            self.engine.schedule(now_us, EventKind.TASK_START, job_id=nxt.job_id,
                                 task_id=nxt.task_id, server_id=server_id)
        elif s.state is ServerState.DRAINING:
            self.engine.schedule(now_us, EventKind.SERVER_DRAIN_COMPLETE, server_id=server_id)
        return task

    # -- lifecycle -----------------------------------------------------------

    def begin_drain(self, server_id: int, now_us: int) -> Server:
        s = self.servers[server_id]
        if s.provenance is not Provenance.TRANSIENT:
            raise ClusterError(f"server {server_id} is on-demand and cannot drain")
        if s.state is not ServerState.ACTIVE:
            raise ClusterError(f"server {server_id} cannot drain from state {s.state.value}")
        s.state = ServerState.DRAINING
        self.active_transient -= 1
        self.draining_transient += 1
        self.short_active -= 1
        if not self.count_draining_in_total:
            self.n_total -= 1
            if s.has_long:
                self.n_long -= 1
        if s.idle:
            self.engine.schedule(now_us, EventKind.SERVER_DRAIN_COMPLETE, server_id=server_id)
        return s

    def retire(self, server_id: int, now_us: int) -> Server:
        s = self.servers[server_id]
        if s.state is not ServerState.DRAINING:
            raise ClusterError(f"server {server_id} cannot retire from state {s.state.value}")
        if not s.idle:
            raise ClusterError(f"server {server_id} retired with work outstanding")
        s.state = ServerState.RETIRED
        s.retired_us = now_us
        self.draining_transient -= 1
        if self.count_draining_in_total:
            self.n_total -= 1
            if s.has_long:
                self.n_long -= 1
        return s

    def force_retire(self, server_id: int, now_us: int) -> list[Task]:
        """Revocation deadline: rip the server out and hand back its work."""
        s = self.servers[server_id]
        if s.state is ServerState.RETIRED:
            return []
        leftovers: list[Task] = []
        if s.running is not None:
            leftovers.append(s.running)
            s.running = None
        leftovers.extend(s.queue)
        s.queue.clear()
        s.queued_work_us = 0
        was = s.state
        if was is ServerState.ACTIVE:
            self.active_transient -= 1
            self.short_active -= 1
            self.n_total -= 1
            if s.has_long:
                self.n_long -= 1
        elif was is ServerState.DRAINING:
            self.draining_transient -= 1
            if self.count_draining_in_total:
                self.n_total -= 1
                if s.has_long:
                    self.n_long -= 1
        else:
            raise ClusterError(f"server {server_id} revoked from state {was.value}")
        s.long_count = 0
        s.start_pending = False
        s.state = ServerState.RETIRED
        s.retired_us = now_us
        for t in leftovers:
            t.server_id = None
            t.start_us = None
        return leftovers

    def _counted(self, s: Server) -> bool:
        if s.state is ServerState.ACTIVE:
            return True
        return s.state is ServerState.DRAINING and self.count_draining_in_total

    # -- views ---------------------------------------------------------------

    def _row(self, s: Server, now_us: int) -> ServerRow:
        return ServerRow(s.server_id, s.partition, s.provenance, s.state,
                         len(s.queue), s.remaining_work_us(now_us), s.has_long)

    def snapshot(self, now_us: int) -> ClusterSnapshot:
        general = []
        short = []
        for sid in sorted(self.servers):
            s = self.servers[sid]
            if s.state in (ServerState.ACTIVE, ServerState.DRAINING):
                row = self._row(s, now_us)
                (general if s.partition is Partition.GENERAL else short).append(row)
        return ClusterSnapshot(
            time_us=now_us,
            general=tuple(general),
            short_only=tuple(short),
            n_total=self.n_total,
            n_long=self.n_long,
            pending_transient=self.pending_transient,
            active_transient=self.active_transient,
            draining_transient=self.draining_transient,
            count_draining_in_total=self.count_draining_in_total,
        )

    def recount_long_load(self) -> tuple[int, int]:
        """Scan everything: (servers holding a long task, counted servers)."""
        n_long = 0
        n_total = 0
        for s in self.servers.values():
            if not self._counted(s):
                continue
            n_total += 1
            if s.scan_long_count() > 0:
                n_long += 1
        return n_long, n_total

    def release_candidates(self, now_us: int) -> list[tuple[int, int]]:
        """Transient servers eligible for release: active, not yet draining.
        Returned as (remaining work, server id), unsorted."""
        out = []
        for sid in self.transient_ids:
            s = self.servers[sid]
            if s.state is ServerState.ACTIVE:
                out.append((s.remaining_work_us(now_us), sid))
        return out

    def alive_transient(self) -> list[Server]:
        return [self.servers[sid] for sid in self.transient_ids
                if self.servers[sid].state in (ServerState.ACTIVE, ServerState.DRAINING)]
