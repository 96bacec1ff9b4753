import math
import random
from statistics import fmean

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstsim.engine import US_PER_S, to_us
from burstsim.workload import (
    GeneratorConfig,
    JobClass,
    Phase,
    TraceParseError,
    _draw_task_count,
    _lognormal_us,
    _phase_at,
    classify,
    concurrency_profile,
    generate_jobs,
    make_job,
    parse_trace,
    serialize_trace,
)

TRACE = """\
# two shorts and a long
2 0.5 2 3.25 4
1 0.5 1 10
3 12 2 100 95.5
"""


# ---------------------------------------------------------------------------
# parsing

def test_parse_skips_comments_and_sorts_by_submit_then_id():
    jobs = parse_trace(TRACE.splitlines())
    assert [j.job_id for j in jobs] == [1, 2, 3]
    assert jobs[0].submit_us == 500_000
    assert [t.duration_us for t in jobs[1].tasks] == [3_250_000, 4_000_000]
    assert jobs[2].job_class is JobClass.LONG
    assert jobs[0].job_class is JobClass.SHORT


def test_parse_round_trip_is_exact():
    jobs = parse_trace(TRACE.splitlines())
    text = serialize_trace(jobs)
    assert parse_trace(text.splitlines()) == jobs


def test_serialize_empty_is_empty():
    assert serialize_trace([]) == ""


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("1 0.5", "at least 3 fields"),
        ("x 0.5 1 3", "job_id"),
        ("1 abc 1 3", "submit_time"),
        ("1 -0.5 1 3", "submit_time"),
        ("1 inf 1 3", "not a finite"),
        ("1 0.5 0", "num_tasks must be positive"),
        ("1 0.5 2 3", "found 1 durations"),
        ("1 0.5 1 0", "dur_1"),
        ("1 0.5 1 nan", "dur_1"),
    ],
)
def test_parse_errors_name_line_and_field(line, fragment):
    with pytest.raises(TraceParseError, match=fragment) as exc:
        parse_trace(["# header", line])
    assert "line 2" in str(exc.value)


def test_parse_rejects_duplicate_job_ids():
    with pytest.raises(TraceParseError, match="duplicate job_id 7"):
        parse_trace(["7 0 1 5", "7 1 1 5"])


def test_durations_below_a_microsecond_are_rejected():
    with pytest.raises(TraceParseError, match="dur_1"):
        parse_trace(["1 0 1 0.0000004"])
    jobs = parse_trace(["1 0 1 0.000001"])
    assert jobs[0].tasks[0].duration_us == 1


# ---------------------------------------------------------------------------
# classification

def test_mean_at_cutoff_is_long():
    cutoff = to_us(90.0)
    assert classify([to_us(80.0), to_us(100.0)], cutoff) is JobClass.LONG
    assert classify([to_us(90.0)], cutoff) is JobClass.LONG


def test_mean_a_microsecond_under_cutoff_is_short():
    cutoff = to_us(90.0)
    assert classify([to_us(90.0) - 1], cutoff) is JobClass.SHORT
    # float mean would wobble here; integer comparison must not
    assert classify([to_us(89.999999), to_us(90.0)], cutoff) is JobClass.SHORT


def test_classify_requires_tasks():
    with pytest.raises(ValueError):
        classify([], to_us(90.0))


@given(st.lists(st.integers(1, 10**9), min_size=1, max_size=20), st.integers(1, 10**8))
def test_classify_matches_exact_rational_mean(durations, cutoff):
    from fractions import Fraction

    want = JobClass.LONG if Fraction(sum(durations), len(durations)) >= cutoff else JobClass.SHORT
    assert classify(durations, cutoff) is want


# ---------------------------------------------------------------------------
# generation

def test_generation_is_seed_stable():
    cfg = GeneratorConfig(num_jobs=50)
    assert generate_jobs(cfg, seed=3) == generate_jobs(cfg, seed=3)
    assert generate_jobs(cfg, seed=3) != generate_jobs(cfg, seed=4)


def test_generated_stream_shape():
    cfg = GeneratorConfig(num_jobs=200, task_cap=30)
    jobs = generate_jobs(cfg, seed=1)
    assert [j.job_id for j in jobs] == list(range(1, 201))
    assert all(a.submit_us <= b.submit_us for a, b in zip(jobs, jobs[1:]))
    assert all(1 <= len(j.tasks) <= 30 for j in jobs)
    cutoff = to_us(cfg.cutoff_s)
    # the label must agree with the cutoff rule, not the family coin
    for job in jobs:
        assert job.job_class is classify([t.duration_us for t in job.tasks], cutoff)


def test_generated_jobs_survive_trace_round_trip():
    jobs = generate_jobs(GeneratorConfig(num_jobs=40), seed=9)
    assert parse_trace(serialize_trace(jobs).splitlines()) == jobs


def test_phase_long_fraction_override():
    phases = (Phase(math.inf, 1.0, long_fraction=1.0),)
    cfg = GeneratorConfig(num_jobs=120, long_fraction=0.0, burst_phases=phases, task_cap=5)
    jobs = generate_jobs(cfg, seed=2)
    assert all(j.job_class is JobClass.LONG for j in jobs)


def test_phase_schedule_cycles():
    phases = (Phase(10.0, 1.0), Phase(20.0, 2.0))
    assert _phase_at(phases, 5.0) is phases[0]
    assert _phase_at(phases, 10.0) is phases[1]
    assert _phase_at(phases, 29.9) is phases[1]
    assert _phase_at(phases, 30.0) is phases[0]
    assert _phase_at(phases, 65.0) is phases[0]


def test_infinite_tail_phase_does_not_cycle():
    phases = (Phase(10.0, 1.0), Phase(math.inf, 3.0))
    assert _phase_at(phases, 1e12) is phases[1]


def test_burst_phase_rate_multiplier_compresses_arrivals():
    calm = GeneratorConfig(num_jobs=400, burst_phases=(Phase(math.inf, 1.0),))
    hot = GeneratorConfig(num_jobs=400, burst_phases=(Phase(math.inf, 4.0),))
    span = lambda jobs: jobs[-1].submit_us - jobs[0].submit_us
    assert span(generate_jobs(hot, seed=5)) < span(generate_jobs(calm, seed=5)) / 2


def test_truncated_pareto_respects_bounds_and_mean():
    rng = random.Random(11)
    cfg = GeneratorConfig(task_shape=0.81, task_min=1, task_cap=49960)
    draws = [_draw_task_count(rng, cfg) for _ in range(50_000)]
    assert min(draws) >= 1
    assert max(draws) <= 49960
    # heavy tail pushes the mean far above the median of 1
    assert 25 < fmean(draws) < 50


def test_lognormal_draws_target_the_mean():
    rng = random.Random(7)
    draws = [_lognormal_us(rng, 8.0, 0.8) for _ in range(20_000)]
    assert 7.5e6 < fmean(draws) < 8.5e6
    assert min(draws) >= 1


def test_generator_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig(mean_arrival_rate=0.0)
    with pytest.raises(ValueError):
        GeneratorConfig(burst_phases=())
    with pytest.raises(ValueError):
        GeneratorConfig(burst_phases=(Phase(0.0, 1.0),))
    with pytest.raises(ValueError):
        GeneratorConfig(task_min=10, task_cap=5)
    with pytest.raises(ValueError):
        GeneratorConfig(long_fraction=1.5)


# ---------------------------------------------------------------------------
# concurrency profile

def brute_profile_integrals(jobs, coarse_us, n_windows):
    """O(tasks * windows) overlap sum, the slow way."""
    out = [0] * n_windows
    for job in jobs:
        for task in job.tasks:
            for w in range(n_windows):
                lo = max(job.submit_us, w * coarse_us)
                hi = min(job.submit_us + task.duration_us, (w + 1) * coarse_us)
                if hi > lo:
                    out[w] += hi - lo
    return out


def test_single_task_fills_exactly_one_window():
    jobs = [make_job(1, 0, [to_us(100.0)], to_us(90.0))]
    prof = concurrency_profile(jobs, fine_window_s=100.0, coarse_window_s=100.0)
    assert prof.values == (1.0,)
    assert prof.window_integrals_us == (100_000_000,)
    assert prof.mean == 1.0
    assert prof.std == 0.0


def test_task_spanning_a_window_boundary():
    jobs = [make_job(1, to_us(50.0), [to_us(100.0)], to_us(90.0))]
    prof = concurrency_profile(jobs, fine_window_s=100.0, coarse_window_s=100.0)
    assert prof.values == (0.5, 0.5)


def test_empty_stream_profile():
    prof = concurrency_profile([], fine_window_s=100.0, coarse_window_s=300.0)
    assert prof.values == ()
    assert prof.mean == 0.0


def test_profile_conserves_total_work_exactly():
    jobs = generate_jobs(GeneratorConfig(num_jobs=300, task_cap=20), seed=6)
    prof = concurrency_profile(jobs, fine_window_s=50.0, coarse_window_s=200.0)
    assert prof.total_task_us == sum(j.total_work_us for j in jobs)


def test_profile_matches_brute_force_overlaps():
    jobs = generate_jobs(GeneratorConfig(num_jobs=60, task_cap=10), seed=13)
    prof = concurrency_profile(jobs, fine_window_s=25.0, coarse_window_s=75.0)
    oracle = brute_profile_integrals(jobs, prof.coarse_window_us, len(prof.values))
    assert list(prof.window_integrals_us) == oracle
    assert prof.values == tuple(x / prof.coarse_window_us for x in oracle)


@settings(max_examples=40)
@given(
    st.lists(
        st.tuples(st.integers(0, 500), st.lists(st.integers(1, 400), min_size=1, max_size=4)),
        min_size=1,
        max_size=12,
    )
)
def test_profile_brute_force_property(raw):
    jobs = [make_job(i + 1, sub, durs, 10**9) for i, (sub, durs) in enumerate(raw)]
    prof = concurrency_profile(jobs, fine_window_s=3e-5, coarse_window_s=9e-5)
    oracle = brute_profile_integrals(jobs, prof.coarse_window_us, len(prof.values))
    assert list(prof.window_integrals_us) == oracle


def test_window_sizes_must_nest():
    with pytest.raises(ValueError, match="multiple"):
        concurrency_profile([], fine_window_s=100.0, coarse_window_s=250.0)
    with pytest.raises(ValueError, match="positive"):
        concurrency_profile([], fine_window_s=0.0, coarse_window_s=100.0)
