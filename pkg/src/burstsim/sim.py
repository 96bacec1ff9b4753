"""Wires workload, cluster, scheduler and the transient manager onto the
event engine, runs to completion, and assembles the result.

Rebalance triggers: a long job is placed, a long task finishes, a transient
server activates, drains out, or is revoked. Baseline mode never builds a
manager, so the short partition stays the static on-demand set.
"""

import os
from dataclasses import asdict, dataclass
from typing import Optional

from .cluster import Cluster, Partition, Provenance, ServerState, Task
from .config import Mode, RunConfig
from .engine import Engine, Event, EventKind, RunSummary, US_PER_S, to_us
from .metrics import (
    DelaySummary,
    MetricsCollector,
    ServerRecord,
    TransientUsage,
    cdf,
    delays_s,
    job_delays_s,
    summarize_values,
    transient_usage,
    write_cdf_csv,
    write_summary_json,
    write_tasks_csv,
)
from .scheduler import Scheduler
from .transient import LongLoadState, ReleaseTransient, RequestTransient, TransientManager
from .workload import JobClass, JobSpec, generate_jobs, parse_trace


class InvariantViolation(RuntimeError):
    pass


@dataclass
class RunResult:
    config: RunConfig
    summary: dict
    records: list
    server_records: list
    short_tasks: DelaySummary
    long_tasks: DelaySummary
    usage: TransientUsage
    final_time_us: int
    engine_summary: RunSummary
    cdf_short: list
    peak_committed: int
    peak_short_active: int
    stale_events: int
    counts: tuple[int, int, int]  # arrived, started, completed


class Simulation:
    def __init__(self, config: RunConfig, jobs: Optional[list[JobSpec]] = None,
                 event_log=None):
        config.validate()
        self.config = config
        if jobs is not None:
            self.jobs = sorted(jobs, key=lambda j: (j.submit_us, j.job_id))
        elif config.trace_path is not None:
            with open(config.trace_path) as f:
                self.jobs = parse_trace(f, config.cutoff_s)
        else:
            self.jobs = generate_jobs(config.generator, config.seed)
        self._jobs_by_id = {j.job_id: j for j in self.jobs}

        self.engine = Engine(config.seed, event_log=event_log)
        self.cluster = Cluster(self.engine, config.count_draining_in_total)
        self.scheduler = Scheduler(config.scheduler_config())
        self.metrics = MetricsCollector()
        self.cost = config.cost_model()
        self._revocation = config.revocation()
        self._delay_us = to_us(config.provisioning_delay_s)

        for _ in range(config.general_servers):
            self.cluster.add_on_demand(Partition.GENERAL)
        if config.mode is Mode.BASELINE:
            self.manager = None
            short_on_demand = config.short_size
        else:
            self.manager = TransientManager(self.cost, config.threshold, config.hysteresis)
            short_on_demand = self.cost.retained_on_demand
        for _ in range(short_on_demand):
            self.cluster.add_on_demand(Partition.SHORT_ONLY)

        e = self.engine
        e.register(EventKind.JOB_ARRIVAL, self._on_job_arrival)
        e.register(EventKind.TASK_START, self._on_task_start)
        e.register(EventKind.TASK_FINISH, self._on_task_finish)
        e.register(EventKind.SERVER_PROVISIONED, self._on_provisioned)
        e.register(EventKind.SERVER_DRAIN_COMPLETE, self._on_drain_complete)
        e.register(EventKind.SERVER_REVOCATION_WARNING, self._on_revocation_warning)
        e.register(EventKind.SERVER_REVOKED, self._on_revoked)
        e.register(EventKind.SIM_END, self._on_sim_end)
        if config.debug:
            e.add_post_dispatch(self._check_invariants)

        self._remaining: dict[int, int] = {}
        self._revocation_clocks: dict[int, dict[str, Event]] = {}
        self.stale_events = 0
        self.completed_jobs = 0
        self.peak_committed = 0
        self._ended = False

    # -- event handlers ------------------------------------------------------

    def _on_job_arrival(self, ev: Event) -> None:
        job = self._jobs_by_id[ev.job_id]
        now = self.engine.now_us
        self.metrics.job_arrived(len(job.tasks))
        self._remaining[job.job_id] = len(job.tasks)
        snap = self.cluster.snapshot(now)
        if job.job_class is JobClass.LONG:
            assignments = self.scheduler.place_long_job(job, snap)
        else:
            assignments = self.scheduler.place_short_job(job, snap, self.engine.rng)
        for task, sid in assignments:
            self.cluster.enqueue(sid, task, now)
        if job.job_class is JobClass.LONG:
            self._rebalance(now)

    def _on_task_start(self, ev: Event) -> None:
        s = self.cluster.servers[ev.server_id]
        if not s.start_pending:
            self.stale_events += 1
            return
        task = self.cluster.start_next(ev.server_id, self.engine.now_us)
        self.metrics.task_started(first_time=not task.ever_started)
        task.ever_started = True

    def _on_task_finish(self, ev: Event) -> None:
        s = self.cluster.servers[ev.server_id]
        running = s.running
        if (running is None or running.job_id != ev.job_id
                or running.task_id != ev.task_id):
            self.stale_events += 1
            return
        now = self.engine.now_us
        task = self.cluster.finish_running(ev.server_id, now)
        self.metrics.task_completed(task, s.provenance)
        left = self._remaining[task.job_id] - 1
        self._remaining[task.job_id] = left
        if left == 0:
            self.completed_jobs += 1
        if task.job_class is JobClass.LONG:
            self._rebalance(now)

    def _on_provisioned(self, ev: Event) -> None:
        now = self.engine.now_us
        s = self.cluster.activate(ev.server_id, now)
        self.metrics.transient_activated(now)
        if self._revocation is not None:
            lifetime = self.engine.rng.expovariate(1.0 / self._revocation.mean_lifetime_s)
            deadline = now + to_us(lifetime)
            warn_at = max(now, deadline - to_us(self._revocation.warning_s))
            clocks = {
                "warning": self.engine.schedule(
                    warn_at, EventKind.SERVER_REVOCATION_WARNING, server_id=s.server_id),
                "deadline": self.engine.schedule(
                    deadline, EventKind.SERVER_REVOKED, server_id=s.server_id),
            }
            s.revocation_deadline_us = deadline
            self._revocation_clocks[s.server_id] = clocks
        self._rebalance(now)

    def _on_drain_complete(self, ev: Event) -> None:
        s = self.cluster.servers[ev.server_id]
        if s.state is not ServerState.DRAINING:
            self.stale_events += 1
            return
        now = self.engine.now_us
        self.cluster.retire(ev.server_id, now)
        self._cancel_clocks(ev.server_id)
        self.metrics.transient_retired(ServerRecord(
            s.server_id, s.requested_us, s.activated_us, now, s.revoked))
        self._rebalance(now)

    def _on_revocation_warning(self, ev: Event) -> None:
        s = self.cluster.servers[ev.server_id]
        clocks = self._revocation_clocks.get(ev.server_id)
        if clocks is not None:
            clocks.pop("warning", None)
        if s.state is ServerState.RETIRED:
            self.stale_events += 1
            return
        s.revoked = True
        if s.state is ServerState.ACTIVE:
            self.cluster.begin_drain(ev.server_id, self.engine.now_us)
        # already draining: nothing extra, the deadline clock still runs

    def _on_revoked(self, ev: Event) -> None:
        s = self.cluster.servers[ev.server_id]
        if s.state is ServerState.RETIRED:
            self.stale_events += 1
            return
        now = self.engine.now_us
        leftovers = self.cluster.force_retire(ev.server_id, now)
        self._cancel_clocks(ev.server_id)
        self.metrics.transient_retired(ServerRecord(
            s.server_id, s.requested_us, s.activated_us, now, True))
        if leftovers:
            self.metrics.redispatched += len(leftovers)
            self._redispatch(leftovers, now)
        self._rebalance(now)

    def _on_sim_end(self, ev: Event) -> None:
        now = self.engine.now_us
        for s in self.cluster.alive_transient():
            self.metrics.transient_retired(ServerRecord(
                s.server_id, s.requested_us, s.activated_us, now, s.revoked,
                open_at_end=True))
        self._ended = True

    # -- helpers ---------------------------------------------------------------

    def _redispatch(self, tasks: list[Task], now: int) -> None:
        """Surviving work from a revoked server goes to the least-loaded
        on-demand short-only server; with none active, any short-only
        server, then the general partition, so no task is ever dropped."""
        snap = self.cluster.snapshot(now)
        active_short = [r for r in snap.short_only if r.state is ServerState.ACTIVE]
        pools = [
            [r for r in active_short if r.provenance is Provenance.ON_DEMAND],
            active_short,
            [r for r in snap.general if r.state is ServerState.ACTIVE],
        ]
        rows = next((p for p in pools if p), None)
        if rows is None:
            raise InvariantViolation("revoked work with no active servers anywhere")
        extra: dict[int, int] = {}
        for task in tasks:
            best = min(rows, key=lambda r: (r.remaining_us + extra.get(r.server_id, 0),
                                            r.server_id))
            extra[best.server_id] = extra.get(best.server_id, 0) + task.duration_us
            self.cluster.enqueue(best.server_id, task, now)

    def _rebalance(self, now: int) -> None:
        if self.manager is None:
            return
        c = self.cluster
        state = LongLoadState(c.n_long, c.n_total, c.pending_transient, c.active_transient)
        actions = self.manager.rebalance(state, c.release_candidates(now))
        for action in actions:
            if isinstance(action, RequestTransient):
                s = c.request_transient(now)
                self.engine.schedule(now + self._delay_us, EventKind.SERVER_PROVISIONED,
                                     server_id=s.server_id)
            else:
                c.begin_drain(action.server_id, now)
        self.peak_committed = max(self.peak_committed,
                                  c.active_transient + c.pending_transient)

    def _cancel_clocks(self, server_id: int) -> None:
        clocks = self._revocation_clocks.pop(server_id, None)
        if clocks:
            for pending in clocks.values():
                self.engine.cancel(pending)

    # -- live checks -------------------------------------------------------------

    def _check_invariants(self, ev: Event) -> None:
        c = self.cluster
        recount = c.recount_long_load()
        if recount != (c.n_long, c.n_total):
            raise InvariantViolation(
                f"after {ev.kind.value} seq={ev.seq}: tracked long-load "
                f"({c.n_long}, {c.n_total}) != recount {recount}")
        if self.manager is not None:
            committed = c.active_transient + c.pending_transient
            if committed > self.cost.max_transient:
                raise InvariantViolation(
                    f"committed transient {committed} exceeds K={self.cost.max_transient}")
            if c.short_active > self.cost.short_partition_cap:
                raise InvariantViolation(
                    f"short partition active {c.short_active} exceeds "
                    f"cap={self.cost.short_partition_cap}")
        for s in c.servers.values():
            if s.queue and s.running is None and not s.start_pending:
                raise InvariantViolation(f"server {s.server_id} queued work but idle")
            if s.long_count != s.scan_long_count():
                raise InvariantViolation(f"server {s.server_id} long_count drift")
            if s.queued_work_us != s.scan_queued_work_us():
                raise InvariantViolation(f"server {s.server_id} queued_work drift")

    # -- driving -------------------------------------------------------------

    def run(self) -> RunResult:
        for job in self.jobs:
            self.engine.schedule(job.submit_us, EventKind.JOB_ARRIVAL, job_id=job.job_id)
        summary1 = self.engine.run()
        self.engine.schedule(self.engine.now_us, EventKind.SIM_END)
        summary2 = self.engine.run()
        engine_summary = RunSummary(
            summary1.dispatched + summary2.dispatched,
            self.engine.now_us,
            {**summary1.by_kind, **{k: summary1.by_kind.get(k, 0) + v
                                    for k, v in summary2.by_kind.items()}},
        )
        return self._result(engine_summary)

    def _result(self, engine_summary: RunSummary) -> RunResult:
        m = self.metrics
        final_us = self.engine.now_us
        short_tasks = summarize_values(delays_s(m.records, JobClass.SHORT))
        long_tasks = summarize_values(delays_s(m.records, JobClass.LONG))
        short_jobs = summarize_values(job_delays_s(m.records, JobClass.SHORT))
        long_jobs = summarize_values(job_delays_s(m.records, JobClass.LONG))
        usage = transient_usage(m.server_records, final_us, self.cost)
        cdf_short = cdf(delays_s(m.records, JobClass.SHORT))
        counts = (m.arrived, m.started, m.completed)

        summary = {
            "config": self._config_echo(),
            "counts": {
                "jobs": len(self.jobs),
                "jobs_completed": self.completed_jobs,
                "tasks_arrived": m.arrived,
                "tasks_started": m.started,
                "tasks_completed": m.completed,
                "tasks_redispatched": m.redispatched,
                "stale_events": self.stale_events,
                "transient_requested": self.manager.requests if self.manager else 0,
                "transient_released": self.manager.releases if self.manager else 0,
                "transient_used": usage.count,
                "transient_revoked": usage.revoked,
            },
            "delays": {
                "short_task": _delay_dict(short_tasks),
                "long_task": _delay_dict(long_tasks),
                "short_job": _delay_dict(short_jobs),
                "long_job": _delay_dict(long_jobs),
            },
            "transient": {
                "avg_active": round(usage.cost.avg_active_transient, 6),
                "max_active": usage.cost.max_active_transient,
                "avg_lifetime_h": round(usage.avg_lifetime_h, 2),
                "max_lifetime_h": round(usage.max_lifetime_h, 2),
                "r_normalized_on_demand": round(usage.cost.r_normalized_on_demand, 6),
                "replaced_budget": round(usage.cost.replaced_budget, 6),
                "savings_fraction": round(usage.cost.savings_fraction, 6),
                "degenerate": usage.cost.degenerate,
            },
            "run": {
                "final_time_s": round(final_us / US_PER_S, 6),
                "events": engine_summary.dispatched,
                "peak_committed_transient": self.peak_committed,
                "peak_short_active": self.cluster.peak_short_active,
            },
        }
        return RunResult(
            config=self.config,
            summary=summary,
            records=m.records,
            server_records=m.server_records,
            short_tasks=short_tasks,
            long_tasks=long_tasks,
            usage=usage,
            final_time_us=final_us,
            engine_summary=engine_summary,
            cdf_short=cdf_short,
            peak_committed=self.peak_committed,
            peak_short_active=self.cluster.peak_short_active,
            stale_events=self.stale_events,
            counts=counts,
        )

    def _config_echo(self) -> dict:
        c = self.config
        echo = {
            "mode": c.mode.value,
            "seed": c.seed,
            "general_servers": c.general_servers,
            "short_size": c.short_size,
            "replace_fraction": c.replace_fraction,
            "cost_ratio": c.cost_ratio,
            "threshold": c.threshold,
            "hysteresis": c.hysteresis,
            "provisioning_delay_s": c.provisioning_delay_s,
            "probe_count": c.probe_count,
            "avoid_long_servers": c.avoid_long_servers,
            "cutoff_s": c.cutoff_s,
            "count_draining_in_total": c.count_draining_in_total,
            "revocation_mttf_s": c.revocation_mttf_s,
            "revocation_warning_s": c.revocation_warning_s,
            "trace_path": c.trace_path,
            "generator": _json_safe(asdict(c.generator)) if c.generator else None,
        }
        if c.mode is Mode.BASELINE:
            # static partition: the budget never buys transient servers
            echo["capacity"] = {
                "max_transient": 0,
                "retained_on_demand": c.short_size,
                "short_partition_cap": c.short_size,
            }
        else:
            echo["capacity"] = {
                "max_transient": self.cost.max_transient,
                "retained_on_demand": self.cost.retained_on_demand,
                "short_partition_cap": self.cost.short_partition_cap,
            }
        return echo


def _delay_dict(d: DelaySummary) -> dict:
    return {
        "count": d.count,
        "mean_s": round(d.mean_s, 3),
        "max_s": round(d.max_s, 3),
        "p50_s": round(d.p50_s, 3),
        "p99_s": round(d.p99_s, 3),
    }


def _json_safe(obj):
    import math
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_artifacts(result: RunResult, out_dir: str, figures: bool = True) -> list[str]:
    """Write tasks.csv, cdf_short.csv and summary.json; with figures on,
    also render the delay CDF and the transient fleet timeline."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    p = os.path.join(out_dir, "tasks.csv")
    write_tasks_csv(p, result.records)
    written.append(p)
    p = os.path.join(out_dir, "cdf_short.csv")
    write_cdf_csv(p, result.cdf_short)
    written.append(p)
    p = os.path.join(out_dir, "summary.json")
    write_summary_json(p, result.summary)
    written.append(p)
    if figures:
        from . import plots
        p = os.path.join(out_dir, "delay_cdf.png")
        plots.plot_delay_cdf({"short tasks": result.cdf_short}, p)
        written.append(p)
        written.extend(_fleet_figure(result, out_dir))
    return written


def _fleet_figure(result: RunResult, out_dir: str) -> list[str]:
    if not result.server_records:
        return []
    from . import plots
    marks = []
    for r in result.server_records:
        marks.append((r.activated_us, 1))
        if not r.open_at_end:
            marks.append((r.retired_us, -1))
    marks.sort()
    timeline = []
    cur = 0
    for t, d in marks:
        cur += d
        timeline.append((t, cur))
    p = os.path.join(out_dir, "transient_fleet.png")
    plots.plot_transient_timeline(timeline, p, result.final_time_us)
    return [p]
