"""Task placement.

Long jobs go through a centralized pass over the general partition: every
task picks the server with the least remaining work, counting work the same
pass already assigned. Short jobs use per-task sampling: probe a few random
general servers, prefer ones not holding a long task, and fall back to the
least-loaded short-only server when every probe is contaminated.

Placement works off a ClusterSnapshot plus the pass's own deltas, so a
decision never reads half-updated live state.
"""

import random
from dataclasses import dataclass

from .cluster import ClusterSnapshot, Partition, ServerRow, ServerState, Task
from .workload import JobSpec

Assignment = tuple[Task, int]  # (task, server_id)


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchedulerConfig:
    probe_count: int = 2
    avoid_long_servers: bool = True

    def __post_init__(self):
        if self.probe_count < 1:
            raise ValueError("probe_count must be >= 1")


def _task(job: JobSpec, idx: int) -> Task:
    spec = job.tasks[idx]
    return Task(job.job_id, spec.task_id, job.job_class, job.submit_us, spec.duration_us)


class Scheduler:
    def __init__(self, config: SchedulerConfig):
        self.config = config

    def place_long_job(self, job: JobSpec, snap: ClusterSnapshot) -> list[Assignment]:
        """Least-remaining-work placement over active general servers.

        Load is recomputed after every assignment; ties go to the lowest
        server id. Long work never touches the short-only partition.
        """
        load = {r.server_id: r.remaining_us for r in snap.general
                if r.state is ServerState.ACTIVE}
        if not load:
            raise PlacementError("no active general servers for a long job")
        out: list[Assignment] = []
        for i in range(len(job.tasks)):
            sid = min(load, key=lambda s: (load[s], s))
            task = _task(job, i)
            load[sid] += task.duration_us
            out.append((task, sid))
        return out

    def place_short_job(self, job: JobSpec, snap: ClusterSnapshot,
                        rng: random.Random) -> list[Assignment]:
        """Per-task power-of-d probing with long-task avoidance.

        Each task samples probe_count distinct general servers (all of them
        when fewer exist). Probes holding a long task are discarded; if none
        survive, the task goes to the least-loaded short-only server instead.
        With no short-only capacity the best contaminated probe is used
        rather than losing the task.
        """
        general = [r for r in snap.general if r.state is ServerState.ACTIVE]
        short = [r for r in snap.short_only if r.state is ServerState.ACTIVE]
        extra: dict[int, int] = {}
        out: list[Assignment] = []
        for i in range(len(job.tasks)):
            task = _task(job, i)
            probes: list[ServerRow] = []
            if general:
                k = min(self.config.probe_count, len(general))
                probes = [general[j] for j in rng.sample(range(len(general)), k)]
            clean = [r for r in probes if not r.has_long_task] \
                if self.config.avoid_long_servers else probes
            if clean:
                sid = self._least(clean, extra)
            elif short:
                sid = self._least(short, extra)
            elif probes:
                sid = self._least(probes, extra)
            else:
                raise PlacementError("no active servers for a short job")
            extra[sid] = extra.get(sid, 0) + task.duration_us
            out.append((task, sid))
        return out

    @staticmethod
    def _least(rows: list[ServerRow], extra: dict[int, int]) -> int:
        best = min(rows, key=lambda r: (r.remaining_us + extra.get(r.server_id, 0), r.server_id))
        return best.server_id

    def place_job(self, job: JobSpec, snap: ClusterSnapshot,
                  rng: random.Random) -> list[Assignment]:
        from .workload import JobClass
        if job.job_class is JobClass.LONG:
            return self.place_long_job(job, snap)
        return self.place_short_job(job, snap, rng)


def least_loaded(rows: list[ServerRow], partition: Partition | None = None) -> ServerRow | None:
    """Least-remaining-work active row, lowest id on ties. Used for
    re-dispatch after a revocation."""
    cands = [r for r in rows if r.state is ServerState.ACTIVE
             and (partition is None or r.partition is partition)]
    if not cands:
        return None
    return min(cands, key=lambda r: (r.remaining_us, r.server_id))
