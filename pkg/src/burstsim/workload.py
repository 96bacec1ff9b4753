"""Job streams: trace parsing and serialization, synthetic bursty
generation, short/long classification, and an omniscient concurrency
profile.

Trace grammar, one job per line::

    <job_id> <submit_time_s> <num_tasks> <dur_1_s> ... <dur_n_s>

Blank lines and lines starting with '#' are ignored. Times are decimal
seconds and are held internally as integer microseconds.
"""

import itertools
import math
import random
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from statistics import fmean, pstdev
from typing import Iterable, Optional, Sequence

from .engine import US_PER_S, format_s


class JobClass(Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    duration_us: int  # > 0


@dataclass(frozen=True)
class JobSpec:
    job_id: int
    submit_us: int
    tasks: tuple[TaskSpec, ...]
    job_class: JobClass

    @property
    def total_work_us(self) -> int:
        return sum(t.duration_us for t in self.tasks)


class TraceParseError(ValueError):
    pass


def classify(durations_us: Sequence[int], cutoff_us: int) -> JobClass:
    """A job is long iff the mean task duration reaches the cutoff.

    Integer cross-multiplication keeps the boundary case exact: a job whose
    mean equals the cutoff is long.
    """
    if not durations_us:
        raise ValueError("cannot classify a job with no tasks")
    if sum(durations_us) >= cutoff_us * len(durations_us):
        return JobClass.LONG
    return JobClass.SHORT


def make_job(job_id: int, submit_us: int, durations_us: Sequence[int], cutoff_us: int) -> JobSpec:
    tasks = tuple(TaskSpec(i, d) for i, d in enumerate(durations_us))
    return JobSpec(job_id, submit_us, tasks, classify(durations_us, cutoff_us))


def _parse_seconds(text: str, line_no: int, what: str, minimum_us: int) -> int:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise TraceParseError(f"line {line_no}: {what}: not a decimal number: {text!r}") from None
    if not value.is_finite():
        raise TraceParseError(f"line {line_no}: {what}: not a finite number: {text!r}")
    us = int((value * US_PER_S).to_integral_value())
    if us < minimum_us:
        raise TraceParseError(f"line {line_no}: {what}: must be at least {format_s(minimum_us)} s, got {text}")
    return us


def _parse_uint(text: str, line_no: int, what: str) -> int:
    if not text.isdigit():
        raise TraceParseError(f"line {line_no}: {what}: expected an unsigned integer, got {text!r}")
    return int(text)


def parse_trace(lines: Iterable[str], cutoff_s: float = 90.0) -> list[JobSpec]:
    """Parse a trace into jobs sorted by (submit time, job id).

    Accepts any iterable of lines (an open file works). Malformed input
    raises TraceParseError naming the line and field.
    """
    cutoff_us = round(cutoff_s * US_PER_S)
    jobs: list[JobSpec] = []
    seen: set[int] = set()
    for line_no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 3:
            raise TraceParseError(f"line {line_no}: expected at least 3 fields, got {len(fields)}")
        job_id = _parse_uint(fields[0], line_no, "job_id")
        if job_id in seen:
            raise TraceParseError(f"line {line_no}: duplicate job_id {job_id}")
        seen.add(job_id)
        submit_us = _parse_seconds(fields[1], line_no, "submit_time", 0)
        num_tasks = _parse_uint(fields[2], line_no, "num_tasks")
        if num_tasks == 0:
            raise TraceParseError(f"line {line_no}: num_tasks must be positive")
        if len(fields) != 3 + num_tasks:
            raise TraceParseError(
                f"line {line_no}: num_tasks is {num_tasks} but found {len(fields) - 3} durations"
            )
        durations = [
            _parse_seconds(fields[3 + i], line_no, f"dur_{i + 1}", 1) for i in range(num_tasks)
        ]
        jobs.append(make_job(job_id, submit_us, durations, cutoff_us))
    jobs.sort(key=lambda j: (j.submit_us, j.job_id))
    return jobs


def serialize_trace(jobs: Iterable[JobSpec]) -> str:
    """Render jobs back into the one-line-per-job text form.

    parse_trace(serialize_trace(jobs)) reproduces the jobs exactly.
    """
    out = []
    for job in jobs:
        parts = [str(job.job_id), format_s(job.submit_us), str(len(job.tasks))]
        parts.extend(format_s(t.duration_us) for t in job.tasks)
        out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# synthetic generation

@dataclass(frozen=True)
class Phase:
    """One segment of the cycling rate schedule. A phase may override the
    long-job fraction (burst traffic is usually interactive-heavy)."""

    length_s: float
    rate_multiplier: float
    long_fraction: Optional[float] = None


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic bursty stream.

    Arrivals are exponential at ``mean_arrival_rate`` scaled by a
    piecewise-constant multiplier cycling through ``burst_phases``. Task
    counts are a truncated Pareto; per-task durations are lognormal, drawn
    from the short or the long family depending on a biased coin. The class
    label still comes from the cutoff rule, so a borderline draw lands where
    its durations say, not where the coin did.
    """

    num_jobs: int = 1000
    mean_arrival_rate: float = 1.0  # jobs per second
    burst_phases: tuple[Phase, ...] = (Phase(math.inf, 1.0),)
    task_shape: float = 0.81
    task_min: int = 1
    task_cap: int = 49960
    long_fraction: float = 0.02
    short_mean_s: float = 8.0
    short_sigma: float = 0.8
    long_mean_s: float = 1800.0
    long_sigma: float = 0.5
    cutoff_s: float = 90.0

    def __post_init__(self):
        if self.num_jobs < 0:
            raise ValueError("num_jobs must be >= 0")
        if self.mean_arrival_rate <= 0:
            raise ValueError("mean_arrival_rate must be > 0")
        if not self.burst_phases:
            raise ValueError("burst_phases must be non-empty")
        for ph in self.burst_phases:
            if ph.length_s <= 0 or ph.rate_multiplier <= 0:
                raise ValueError("burst phases need positive length and multiplier")
            if ph.long_fraction is not None and not 0.0 <= ph.long_fraction <= 1.0:
                raise ValueError("phase long_fraction must be in [0, 1]")
        if self.task_shape <= 0:
            raise ValueError("task_shape must be > 0")
        if not 1 <= self.task_min <= self.task_cap:
            raise ValueError("need 1 <= task_min <= task_cap")
        if not 0.0 <= self.long_fraction <= 1.0:
            raise ValueError("long_fraction must be in [0, 1]")
        for m in (self.short_mean_s, self.long_mean_s, self.cutoff_s):
            if m <= 0:
                raise ValueError("duration means and cutoff must be > 0")


def _phase_at(phases: Sequence[Phase], t: float) -> Phase:
    finite = sum(ph.length_s for ph in phases if math.isfinite(ph.length_s))
    has_inf = any(not math.isfinite(ph.length_s) for ph in phases)
    if not has_inf and finite > 0:
        t = t % finite
    for ph in phases:
        if t < ph.length_s:
            return ph
        t -= ph.length_s
    return phases[-1]


def _draw_task_count(rng: random.Random, cfg: GeneratorConfig) -> int:
    # truncated Pareto: heavy tail clipped at the cap
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    raw = cfg.task_min / (u ** (1.0 / cfg.task_shape))
    return min(int(raw), cfg.task_cap)


def _lognormal_us(rng: random.Random, mean_s: float, sigma: float) -> int:
    mu = math.log(mean_s) - sigma * sigma / 2.0
    d = rng.lognormvariate(mu, sigma)
    return max(1, round(d * US_PER_S))


def generate_jobs(cfg: GeneratorConfig, seed: int) -> list[JobSpec]:
    """Generate a job stream. Same config and seed give the same stream.

    Draw order per job is fixed (interarrival, class coin, task count,
    durations) so adding knobs later cannot silently reshuffle streams.
    """
    rng = random.Random(seed)
    cutoff_us = round(cfg.cutoff_s * US_PER_S)
    jobs: list[JobSpec] = []
    t = 0.0
    for job_id in range(1, cfg.num_jobs + 1):
        phase = _phase_at(cfg.burst_phases, t)
        t += rng.expovariate(cfg.mean_arrival_rate * phase.rate_multiplier)
        long_frac = cfg.long_fraction if phase.long_fraction is None else phase.long_fraction
        is_long = rng.random() < long_frac
        n = _draw_task_count(rng, cfg)
        if is_long:
            durations = [_lognormal_us(rng, cfg.long_mean_s, cfg.long_sigma) for _ in range(n)]
        else:
            durations = [_lognormal_us(rng, cfg.short_mean_s, cfg.short_sigma) for _ in range(n)]
        jobs.append(make_job(job_id, round(t * US_PER_S), durations, cutoff_us))
    return jobs


# ---------------------------------------------------------------------------
# concurrency profile

@dataclass(frozen=True)
class ConcurrencyProfile:
    """Average task concurrency per coarse window, assuming every task runs
    [submit, submit + duration) on its own server."""

    fine_window_us: int
    coarse_window_us: int
    window_integrals_us: tuple[int, ...]  # exact task-microseconds per window
    values: tuple[float, ...]
    mean: float
    std: float

    @property
    def total_task_us(self) -> int:
        return sum(self.window_integrals_us)


def concurrency_profile(
    jobs: Sequence[JobSpec], fine_window_s: float = 100.0, coarse_window_s: float = 14400.0
) -> ConcurrencyProfile:
    fine_us = round(fine_window_s * US_PER_S)
    coarse_us = round(coarse_window_s * US_PER_S)
    if fine_us <= 0 or coarse_us <= 0:
        raise ValueError("window sizes must be positive")
    if coarse_us % fine_us != 0:
        raise ValueError("coarse window must be a multiple of the fine window")

    deltas: list[tuple[int, int]] = []
    horizon = 0
    for job in jobs:
        for task in job.tasks:
            end = job.submit_us + task.duration_us
            deltas.append((job.submit_us, 1))
            deltas.append((end, -1))
            horizon = max(horizon, end)
    if not deltas:
        return ConcurrencyProfile(fine_us, coarse_us, (), (), 0.0, 0.0)
    deltas.sort()

    n_coarse = (horizon + coarse_us - 1) // coarse_us
    integrals = [0] * n_coarse
    active = 0
    prev = 0
    i = 0
    while i < len(deltas):
        t = deltas[i][0]
        if active > 0 and t > prev:
            _accumulate(integrals, coarse_us, prev, t, active)
        while i < len(deltas) and deltas[i][0] == t:
            active += deltas[i][1]
            i += 1
        prev = t
    values = tuple(x / coarse_us for x in integrals)
    mean = fmean(values) if values else 0.0
    std = pstdev(values) if len(values) > 1 else 0.0
    return ConcurrencyProfile(fine_us, coarse_us, tuple(integrals), values, mean, std)


def _accumulate(integrals: list[int], window_us: int, t0: int, t1: int, count: int) -> None:
    # spread count * (t1 - t0) over the windows the segment crosses
    w = t0 // window_us
    while t0 < t1:
        edge = min(t1, (w + 1) * window_us)
        integrals[w] += count * (edge - t0)
        t0 = edge
        w += 1
