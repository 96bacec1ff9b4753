"""Discrete-event simulation of a two-partition cluster whose short-job
partition is resized on the fly with cheap transient servers."""

__version__ = "0.1.0"

from .engine import Engine, Event, EventInPastError, EventKind, RunSummary
from .workload import (
    GeneratorConfig,
    JobClass,
    JobSpec,
    Phase,
    TaskSpec,
    TraceParseError,
    concurrency_profile,
    generate_jobs,
    parse_trace,
    serialize_trace,
)
from .cluster import Cluster, ClusterError, Partition, Provenance, ServerState, Task
from .scheduler import Scheduler, SchedulerConfig
from .transient import (
    CostModel,
    LongLoadState,
    RevocationConfig,
    TransientManager,
    compute_capacity,
)
from .metrics import CostReport, MetricsCollector, TaskRecord, cdf, transient_usage
from .config import Mode, RunConfig, desk_preset, paper_preset
from .sim import InvariantViolation, RunResult, Simulation, write_artifacts
