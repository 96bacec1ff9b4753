"""Run measurement: per-task records, queueing-delay distributions,
transient-fleet usage and the cost accounting, plus the delimited writers.

Queueing delay is start minus submit. Delays are computed on exact
microsecond timestamps and rounded to milliseconds only at the reporting
boundary.
"""

import csv
import json
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .cluster import Provenance, Task
from .engine import US_PER_S
from .transient import CostModel
from .workload import JobClass


@dataclass(frozen=True)
class TaskRecord:
    job_id: int
    task_id: int
    job_class: JobClass
    submit_us: int
    start_us: int
    finish_us: int
    server_id: int
    provenance: Provenance

    @property
    def delay_us(self) -> int:
        return self.start_us - self.submit_us


@dataclass(frozen=True)
class ServerRecord:
    """One transient server's life. open_at_end marks servers still alive
    when the run stopped; their lifetime is censored at the end time."""

    server_id: int
    requested_us: int
    activated_us: int
    retired_us: int
    revoked: bool
    open_at_end: bool = False

    @property
    def lifetime_us(self) -> int:
        return self.retired_us - self.activated_us


@dataclass(frozen=True)
class DelaySummary:
    count: int
    mean_s: float
    max_s: float
    p50_s: float
    p99_s: float

    @staticmethod
    def empty() -> "DelaySummary":
        return DelaySummary(0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class CostReport:
    avg_active_transient: float
    max_active_transient: int
    r_normalized_on_demand: float
    replaced_budget: float
    savings_fraction: float
    degenerate: bool


@dataclass(frozen=True)
class TransientUsage:
    count: int
    revoked: int
    avg_lifetime_h: float
    max_lifetime_h: float
    cost: CostReport


def delays_s(records: Iterable[TaskRecord], job_class: Optional[JobClass] = None) -> list[float]:
    """Per-task queueing delays in seconds, rounded to the millisecond."""
    return [round(r.delay_us / US_PER_S, 3) for r in records
            if job_class is None or r.job_class is job_class]


def job_delays_s(records: Iterable[TaskRecord], job_class: Optional[JobClass] = None) -> list[float]:
    """Per-job queueing delay: the worst task delay within the job."""
    worst: dict[int, int] = {}
    for r in records:
        if job_class is not None and r.job_class is not job_class:
            continue
        d = r.delay_us
        if d > worst.get(r.job_id, -1):
            worst[r.job_id] = d
    return [round(d / US_PER_S, 3) for d in worst.values()]


def cdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF as (value, fraction <= value), one point per distinct
    value, fractions exact multiples of 1/n."""
    if not values:
        return []
    ordered = sorted(values)
    n = len(ordered)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(ordered, 1):
        if i == n or ordered[i] != v:
            out.append((v, i / n))
    return out


def _quantile(ordered: Sequence[float], q: float) -> float:
    # nearest-rank on a pre-sorted list
    if not ordered:
        return 0.0
    idx = max(0, min(len(ordered) - 1, int(q * len(ordered) + 0.5) - 1))
    return ordered[idx]


def summarize_values(values: Sequence[float]) -> DelaySummary:
    ds = sorted(values)
    if not ds:
        return DelaySummary.empty()
    return DelaySummary(len(ds), fmean(ds), ds[-1], _quantile(ds, 0.50), _quantile(ds, 0.99))


def summarize_delays(records: Iterable[TaskRecord],
                     job_class: Optional[JobClass] = None) -> DelaySummary:
    return summarize_values(delays_s(records, job_class))


def transient_usage(server_records: Sequence[ServerRecord], total_time_us: int,
                    cost: CostModel) -> TransientUsage:
    """Fleet statistics over one run.

    The time-average of the active-transient count equals the summed
    lifetimes divided by the run length, both in exact microseconds, so no
    step-function sweep is needed for the average. The peak does need one.
    """
    n = len(server_records)
    if total_time_us <= 0 or n == 0:
        report = CostReport(0.0, 0, 0.0, cost.replaced_budget,
                            1.0 if cost.replaced_budget > 0 else 0.0,
                            degenerate=True)
        return TransientUsage(n, 0, 0.0, 0.0, report)

    lifetimes = [r.lifetime_us for r in server_records]
    avg_active = sum(lifetimes) / total_time_us

    marks = []
    for r in server_records:
        marks.append((r.activated_us, 1))
        marks.append((r.retired_us, -1))
    marks.sort()
    cur = peak = 0
    for _, d in marks:
        cur += d
        peak = max(peak, cur)

    r_norm = avg_active / cost.cost_ratio
    replaced = cost.replaced_budget
    if replaced > 0:
        savings = 1.0 - r_norm / replaced
        degenerate = False
    else:
        savings = 0.0
        degenerate = True
    report = CostReport(avg_active, peak, r_norm, replaced, savings, degenerate)
    h = 3600.0 * US_PER_S
    return TransientUsage(n, sum(1 for r in server_records if r.revoked),
                          fmean(lifetimes) / h, max(lifetimes) / h, report)


class MetricsCollector:
    """Accumulates records during a run plus conservation counters.

    started counts tasks that began at least once; a re-dispatch after a
    revocation does not double-count, so arrived == started == completed
    must hold once the run has drained.
    """

    def __init__(self):
        self.records: list[TaskRecord] = []
        self.server_records: list[ServerRecord] = []
        self.arrived = 0
        self.started = 0
        self.completed = 0
        self.redispatched = 0
        # step function of the alive transient count, for plotting
        self.transient_timeline: list[tuple[int, int]] = []
        self._alive_transient = 0

    def job_arrived(self, num_tasks: int) -> None:
        self.arrived += num_tasks

    def task_started(self, first_time: bool) -> None:
        if first_time:
            self.started += 1

    def task_completed(self, task: Task, provenance: Provenance) -> None:
        self.completed += 1
        self.records.append(TaskRecord(
            task.job_id, task.task_id, task.job_class, task.submit_us,
            task.start_us, task.finish_us, task.server_id, provenance))

    def transient_activated(self, now_us: int) -> None:
        self._alive_transient += 1
        self.transient_timeline.append((now_us, self._alive_transient))

    def transient_retired(self, record: ServerRecord) -> None:
        self.server_records.append(record)
        if not record.open_at_end:
            self._alive_transient -= 1
            self.transient_timeline.append((record.retired_us, self._alive_transient))


# ---------------------------------------------------------------------------
# writers: byte-stable output (fixed field order, fixed formats, LF endings)

def write_tasks_csv(path, records: Sequence[TaskRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["job_id", "task_id", "class", "submit_s", "start_s",
                    "finish_s", "server_id", "provenance"])
        for r in sorted(records, key=lambda r: (r.job_id, r.task_id)):
            w.writerow([r.job_id, r.task_id, r.job_class.value,
                        f"{r.submit_us / US_PER_S:.6f}",
                        f"{r.start_us / US_PER_S:.6f}",
                        f"{r.finish_us / US_PER_S:.6f}",
                        r.server_id, r.provenance.value])


def write_cdf_csv(path, points: Sequence[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["delay_s", "fraction"])
        for v, frac in points:
            w.writerow([f"{v:.3f}", f"{frac:.9f}"])


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w", newline="") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
