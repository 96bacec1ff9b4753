"""Run configuration, presets, and the key-value config file format.

The desk preset scales the full cluster down by 10x so a run finishes in
seconds; the paper-scale preset keeps the original shape. Config files hold
one ``key = value`` per line with the same keys as the CLI flags.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .scheduler import SchedulerConfig
from .transient import CostModel, RevocationConfig
from .workload import GeneratorConfig, Phase


class ConfigError(ValueError):
    pass


class Mode(Enum):
    BASELINE = "baseline"
    ELASTIC = "elastic"


@dataclass
class RunConfig:
    mode: Mode = Mode.ELASTIC
    general_servers: int = 392
    short_size: int = 8          # N, the short partition being replaced
    replace_fraction: float = 0.5
    cost_ratio: float = 3.0
    threshold: float = 0.95
    hysteresis: float = 0.0
    provisioning_delay_s: float = 120.0
    probe_count: int = 2
    avoid_long_servers: bool = True
    cutoff_s: float = 90.0
    count_draining_in_total: bool = False
    seed: int = 1
    trace_path: Optional[str] = None
    generator: Optional[GeneratorConfig] = None
    out_dir: Optional[str] = None
    revocation_mttf_s: Optional[float] = None  # None disables revocations
    revocation_warning_s: float = 30.0
    debug: bool = False  # event log plus live invariant checks
    figures: bool = True

    def validate(self) -> None:
        if self.general_servers < 1:
            raise ConfigError("general_servers: need at least 1")
        if self.short_size < 0:
            raise ConfigError("short_size: must be >= 0")
        if self.cost_ratio < 1:
            raise ConfigError("cost_ratio: must be >= 1")
        if not 0.0 <= self.replace_fraction <= 1.0:
            raise ConfigError("replace_fraction: must be in [0, 1]")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("threshold: must be in (0, 1]")
        if self.hysteresis < 0 or self.hysteresis > self.threshold:
            raise ConfigError("hysteresis: must be in [0, threshold]")
        if self.provisioning_delay_s < 0:
            raise ConfigError("provisioning_delay_s: must be >= 0")
        if self.probe_count < 1:
            raise ConfigError("probe_count: must be >= 1")
        if self.cutoff_s <= 0:
            raise ConfigError("cutoff_s: must be > 0")
        if self.revocation_mttf_s is not None and self.revocation_mttf_s <= 0:
            raise ConfigError("revocation_mttf_s: must be > 0")
        if self.revocation_warning_s < 0:
            raise ConfigError("revocation_warning_s: must be >= 0")
        if self.trace_path is not None and self.generator is not None:
            raise ConfigError("trace_path and generator are mutually exclusive")
        if self.trace_path is None and self.generator is None:
            raise ConfigError("need a trace_path or a generator")

    def cost_model(self) -> CostModel:
        return CostModel(self.cost_ratio, self.short_size, self.replace_fraction)

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig(self.probe_count, self.avoid_long_servers)

    def revocation(self) -> Optional[RevocationConfig]:
        if self.revocation_mttf_s is None:
            return None
        return RevocationConfig(self.revocation_mttf_s, self.revocation_warning_s)


def desk_preset(**overrides) -> RunConfig:
    """1/10-scale cluster; a full run takes seconds."""
    cfg = RunConfig(general_servers=392, short_size=8)
    return replace(cfg, **overrides)


def paper_preset(**overrides) -> RunConfig:
    """Full-scale cluster shape: 3920 general servers plus a short
    partition of 80."""
    cfg = RunConfig(general_servers=3920, short_size=80)
    return replace(cfg, **overrides)


def desk_bursty_workload(num_jobs: int = 12000) -> GeneratorConfig:
    """The bundled workload for the desk preset.

    Each cycle is calm traffic, then a batch-heavy onset wave that drives
    the long-load ratio over the resize threshold, then the interactive
    flood itself. The onset leads the flood by more than the provisioning
    delay, so an elastic partition is already grown when short work peaks;
    the flood is sized to overwhelm a static 8-server short partition while
    fitting comfortably in a fully grown elastic one.
    """
    return GeneratorConfig(
        num_jobs=num_jobs,
        mean_arrival_rate=1.0,
        burst_phases=(
            Phase(2040.0, 0.5),
            Phase(480.0, 0.7, long_fraction=0.55),
            Phase(1200.0, 2.0, long_fraction=0.26),
        ),
        task_shape=1.0,
        task_min=1,
        task_cap=60,
        long_fraction=0.128,
        short_mean_s=2.0,
        short_sigma=0.8,
        long_mean_s=200.0,
        long_sigma=0.3,
        cutoff_s=90.0,
    )


def paper_tail_workload(num_jobs: int = 2000) -> GeneratorConfig:
    """Heavy-tailed stream in the shape of the full-scale trace: task
    counts average about 35 with a cap just under 50000."""
    return GeneratorConfig(
        num_jobs=num_jobs,
        mean_arrival_rate=2.0,
        burst_phases=(
            Phase(10800.0, 0.4),
            Phase(3600.0, 2.5, long_fraction=0.06),
        ),
        task_shape=0.81,
        task_min=1,
        task_cap=49960,
        long_fraction=0.03,
        short_mean_s=8.0,
        short_sigma=0.8,
        long_mean_s=1800.0,
        long_sigma=0.5,
        cutoff_s=90.0,
    )


# ---------------------------------------------------------------------------
# config files: one "key = value" per line, keys match the CLI flags

_BOOL_KEYS = {"generate", "debug_events", "no_figures", "avoid_long_servers",
              "count_draining_in_total"}
_FLOAT_KEYS = {"p", "threshold", "hysteresis", "provision_delay_s",
               "cutoff_s", "revocation_mttf_s", "revocation_warning_s"}
_INT_KEYS = {"N", "general", "probe_count", "seed", "num_jobs"}
# r stays a string so the file can hold a sweep list, same as the flag
_STR_KEYS = {"mode", "trace", "out", "preset", "r"}
_ALL_KEYS = _BOOL_KEYS | _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


def parse_config_file(text: str) -> dict:
    """Parse the key-value format into a flat dict of typed values."""
    out: dict = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
        else:
            key, _, value = line.partition(" ")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        try:
            if key in _BOOL_KEYS:
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError
                out[key] = value.lower() in ("true", "1", "yes")
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            else:
                out[key] = value
        except ValueError:
            raise ConfigError(f"line {line_no}: bad value for {key!r}: {value!r}") from None
    return out
