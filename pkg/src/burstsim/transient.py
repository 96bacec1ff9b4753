"""Elastic short-partition sizing and the cost model behind it.

The short-only partition starts as round((1-p)*N) on-demand servers. When
the fraction of active servers holding long work rises strictly above the
threshold, transient servers are requested one at a time up to the budget
cap K = floor(r*N*p); when it falls strictly below, the emptiest transient
server is drained. All ratio comparisons are exact rational arithmetic, so
a threshold of 0.95 means 19/20 and never a float neighbour.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .cluster import ClusterSnapshot, ServerState


def _frac(x: float | int | str | Fraction) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class CostModel:
    """Pricing and sizing for replacing part of the short partition.

    cost_ratio r: on-demand price / transient price (>= 1).
    short_size N: size of the all-on-demand short partition being replaced.
    replace_fraction p: fraction of N whose budget moves to transients.

    The replaced budget p*N buys up to K = floor(r*N*p) transient servers;
    round((1-p)*N) on-demand servers are retained, so the partition can
    reach K + retained servers (the integer form of N*((r-1)*p + 1)).
    """

    cost_ratio: float
    short_size: int
    replace_fraction: float
    on_demand_unit_cost: float = 1.0

    def __post_init__(self):
        if self.cost_ratio < 1:
            raise ValueError("cost_ratio must be >= 1")
        if self.short_size < 0:
            raise ValueError("short_size must be >= 0")
        if not 0.0 <= self.replace_fraction <= 1.0:
            raise ValueError("replace_fraction must be in [0, 1]")
        if self.on_demand_unit_cost <= 0:
            raise ValueError("on_demand_unit_cost must be > 0")

    @property
    def transient_unit_cost(self) -> float:
        return self.on_demand_unit_cost / self.cost_ratio

    @property
    def max_transient(self) -> int:
        """K: transient servers the replaced on-demand budget pays for."""
        k = _frac(self.cost_ratio) * self.short_size * _frac(self.replace_fraction)
        return int(k)  # floor for non-negative values

    @property
    def retained_on_demand(self) -> int:
        kept = (1 - _frac(self.replace_fraction)) * self.short_size
        return round(kept)

    @property
    def short_partition_cap(self) -> int:
        return self.max_transient + self.retained_on_demand

    @property
    def replaced_budget(self) -> float:
        """On-demand server equivalents freed by the replacement: p*N."""
        return float(_frac(self.replace_fraction) * self.short_size)


def compute_capacity(cost: CostModel) -> tuple[int, int, int]:
    """(max transient K, short partition cap, retained on-demand)."""
    return cost.max_transient, cost.short_partition_cap, cost.retained_on_demand


@dataclass(frozen=True)
class LongLoadState:
    """Inputs to one rebalance decision."""

    n_long: int
    n_total: int
    pending_transient: int
    active_transient: int

    @property
    def ratio(self) -> float:
        return self.n_long / self.n_total if self.n_total else 0.0


def load_state_from_snapshot(snap: ClusterSnapshot) -> LongLoadState:
    """Recompute the long-load inputs from snapshot rows alone. Slower than
    the cluster's running counters but immune to increment bugs; live checks
    compare the two."""
    rows = list(snap.general) + list(snap.short_only)
    counted = [r for r in rows if r.state is ServerState.ACTIVE
               or (snap.count_draining_in_total and r.state is ServerState.DRAINING)]
    n_total = len(counted)
    n_long = sum(1 for r in counted if r.has_long_task)
    return LongLoadState(n_long, n_total, snap.pending_transient, snap.active_transient)


@dataclass(frozen=True)
class RevocationConfig:
    mean_lifetime_s: float = 64800.0
    warning_s: float = 30.0

    def __post_init__(self):
        if self.mean_lifetime_s <= 0:
            raise ValueError("mean_lifetime_s must be > 0")
        if self.warning_s < 0:
            raise ValueError("warning_s must be >= 0")


@dataclass(frozen=True)
class RequestTransient:
    pass


@dataclass(frozen=True)
class ReleaseTransient:
    server_id: int


Action = RequestTransient | ReleaseTransient


class TransientManager:
    """Threshold policy on the long-load ratio n_long / n_total.

    Strictly above the threshold: request transients while the commitment
    (active + pending) stays under K, counting each pending server into the
    planned total. Strictly below threshold - hysteresis: release the
    transient server with the least remaining work, one at a time, until the
    planned ratio is back at or above the release point. Equality in either
    direction is a no-op.
    """

    def __init__(self, cost: CostModel, threshold: float = 0.95,
                 hysteresis: float = 0.0, max_actions_per_call: Optional[int] = None):
        self.cost = cost
        self.threshold = _frac(threshold)
        self.hysteresis = _frac(hysteresis)
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        if self.hysteresis < 0 or self.threshold - self.hysteresis < 0:
            raise ValueError("hysteresis must be >= 0 and <= threshold")
        self.max_actions_per_call = max_actions_per_call
        self.requests = 0
        self.releases = 0
        self.peak_commitment = 0

    def rebalance(self, state: LongLoadState,
                  victims: Sequence[tuple[int, int]]) -> list[Action]:
        """Decide actions for one trigger.

        victims: (remaining_work_us, server_id) for every active transient
        server; order does not matter, selection sorts by least work then
        lowest id. One call moves in one direction only; a release is
        planned as if the server were already gone, the live ratio catches
        up when its drain completes. Pure apart from the manager's counters.
        """
        k = self.cost.max_transient
        grow = self.threshold
        shrink = self.threshold - self.hysteresis
        committed = state.active_transient + state.pending_transient
        plan_total = state.n_total + state.pending_transient
        n_long = state.n_long
        budget = self.max_actions_per_call
        actions: list[Action] = []
        if n_long * grow.denominator > grow.numerator * plan_total:
            while (committed < k
                   and n_long * grow.denominator > grow.numerator * plan_total
                   and (budget is None or len(actions) < budget)):
                actions.append(RequestTransient())
                committed += 1
                plan_total += 1
            self.requests += len(actions)
        elif n_long * shrink.denominator < shrink.numerator * plan_total:
            for _, sid in sorted(victims):
                if n_long * shrink.denominator >= shrink.numerator * plan_total:
                    break
                if budget is not None and len(actions) >= budget:
                    break
                actions.append(ReleaseTransient(sid))
                plan_total -= 1
            self.releases += len(actions)
        self.peak_commitment = max(self.peak_commitment, committed)
        return actions
