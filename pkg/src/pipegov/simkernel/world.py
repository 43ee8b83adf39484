"""World state for the tick simulation.

Records move through per-stage FIFO queues as cohorts (arrival tick, count,
optional partition label), so per-record freshness can be measured without
materializing individual records. All counters are integers; the world is
valid only while, for every pipeline:

    ingress == materialized + queued + quarantined + dropped

Records withheld by an upstream delay are not ingress until they are
released (or declared dropped), which keeps the equation exact at every
tick.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from pipegov.core.pipeline import (
    PipelineSpec,
    ResourceModel,
    StageSpec,
    stage_topology,
    validate_pipeline_spec,
)
from pipegov.core.schema import Schema, SchemaDelta


class Health(str, Enum):
    HEALTHY = "Healthy"
    FAILING = "Failing"
    HALTED = "Halted"
    DEFERRED = "Deferred"


@dataclass(slots=True)
class Cohort:
    arrival_tick: int
    count: int
    partition: str | None = None


@dataclass(slots=True)
class SimConstants:
    """Latencies and spans the kernel charges for recovery work, in ticks."""

    replay_latency: int = 5
    rollback_latency: int = 10
    recompute_latency_per_partition: int = 3
    quarantine_latency: int = 1
    resume_latency: int = 1
    drift_span: int = 60  # tagged-arrival window for drift on streaming pipelines
    release_span: int = 10  # ticks over which withheld records re-enter

    def to_dict(self) -> dict:
        return {
            "replay_latency": self.replay_latency,
            "rollback_latency": self.rollback_latency,
            "recompute_latency_per_partition": self.recompute_latency_per_partition,
            "quarantine_latency": self.quarantine_latency,
            "resume_latency": self.resume_latency,
            "drift_span": self.drift_span,
            "release_span": self.release_span,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConstants":
        base = cls()
        for key, value in raw.items():
            if not hasattr(base, key):
                raise ValueError(f"unknown sim constant: {key}")
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"sim constant {key} must be a non-negative integer")
            setattr(base, key, value)
        return base


@dataclass
class StageState:
    spec: StageSpec
    alloc: int
    queue: deque[Cohort] = field(default_factory=deque)
    downstream: tuple[str, ...] = ()
    last_checkpoint_tick: int = 0
    # forwarded record counts per downstream stage since the last checkpoint;
    # Replay pulls these back out of downstream queue tails.
    forwarded_since_checkpoint: dict[str, int] = field(default_factory=dict)

    def depth(self) -> int:
        return sum(c.count for c in self.queue)


@dataclass
class PendingDrift:
    partition: str
    delta: SchemaDelta
    incompatible: bool
    opened_tick: int
    window_end: int  # arrivals through this tick belong to the drifted partition
    quarantine_mode: bool = False


@dataclass
class PipelineState:
    spec: PipelineSpec
    stages: dict[str, StageState]
    topo: list[str]
    schema: Schema
    health: Health = Health.HEALTHY
    failing_cause: str | None = None  # "schema_drift" | "task_failure" | "missing_input"
    failing_stage: str | None = None
    recover_at: int | None = None
    recover_to: Health = Health.HEALTHY
    paused_until: int = 0  # processing pause for rollback/recompute work
    pending_drift: PendingDrift | None = None

    # upstream delay state
    suppress_until: int | None = None
    missing_fraction: float = 0.0
    withheld: int = 0
    release_plan: deque[tuple[int, int]] = field(default_factory=deque)

    # per-pipeline record accounting
    ingress: int = 0
    materialized: int = 0
    quarantined: int = 0
    dropped: int = 0

    # rollback support and freshness bookkeeping
    materialized_since_checkpoint: list[Cohort] = field(default_factory=list)
    newest_materialized_arrival: int = 0
    lag_histogram: dict[int, int] = field(default_factory=dict)

    def queued(self) -> int:
        return sum(s.depth() for s in self.stages.values())

    def allocation_total(self) -> int:
        return sum(s.alloc for s in self.stages.values())

    def entry_stage(self) -> StageState:
        return self.stages[self.topo[0]]

    def sink_stage(self) -> StageState:
        return self.stages[self.topo[-1]]

    def accounting_holds(self) -> bool:
        return self.ingress == self.materialized + self.queued() + self.quarantined + self.dropped

    def processing_allowed(self, tick: int) -> bool:
        return self.health is Health.HEALTHY and tick >= self.paused_until


@dataclass(frozen=True)
class PipelineSample:
    queue_depth: int
    effective_rate: int
    freshness_lag: int
    failure_count: int
    utilization: float
    allocation: int
    ingress: int
    health: str
    suppressed: bool

    def to_dict(self) -> dict:
        return {
            "queue_depth": self.queue_depth,
            "effective_rate": self.effective_rate,
            "freshness_lag": self.freshness_lag,
            "failure_count": self.failure_count,
            "utilization": self.utilization,
            "allocation": self.allocation,
            "ingress": self.ingress,
            "health": self.health,
            "suppressed": self.suppressed,
        }


@dataclass(frozen=True)
class TelemetrySnapshot:
    tick: int
    pipelines: dict[str, PipelineSample]
    total_cost: float
    capacity: int
    capacity_headroom: int
    contention_factor: float

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "pipelines": {pid: s.to_dict() for pid, s in sorted(self.pipelines.items())},
            "total_cost": self.total_cost,
            "capacity": self.capacity,
            "capacity_headroom": self.capacity_headroom,
            "contention_factor": self.contention_factor,
        }


@dataclass(frozen=True)
class TickReport:
    tick: int
    snapshot: TelemetrySnapshot
    failures: tuple[dict, ...]
    transitions: tuple[dict, ...]
    materialized: int
    cost: float
    stage_processed: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "snapshot": self.snapshot.to_dict(),
            "failures": list(self.failures),
            "transitions": list(self.transitions),
            "materialized": self.materialized,
            "cost": self.cost,
            "stage_processed": self.stage_processed,
        }


@dataclass
class SimWorld:
    pipelines: dict[str, PipelineState]
    resource_model: ResourceModel
    constants: SimConstants
    tick: int = 0
    capacity_reductions: list[tuple[int, int]] = field(default_factory=list)  # (until, units)
    consumed_faults: set[tuple] = field(default_factory=set)
    pending_failures: list[dict] = field(default_factory=list)
    pending_transitions: list[dict] = field(default_factory=list)

    def pipeline_ids(self) -> list[str]:
        return sorted(self.pipelines)

    def effective_capacity(self, tick: int) -> int:
        reduced = sum(units for until, units in self.capacity_reductions if tick < until)
        return max(1, self.resource_model.capacity - reduced)

    def counters(self) -> dict[str, int]:
        totals = {"ingress": 0, "materialized": 0, "queued": 0, "quarantined": 0, "dropped": 0}
        for p in self.pipelines.values():
            totals["ingress"] += p.ingress
            totals["materialized"] += p.materialized
            totals["queued"] += p.queued()
            totals["quarantined"] += p.quarantined
            totals["dropped"] += p.dropped
        return totals


def build_world(
    pipelines: list[PipelineSpec],
    resource_model: ResourceModel,
    allocations: dict[str, dict[str, int]] | None = None,
    constants: SimConstants | None = None,
) -> SimWorld:
    """Construct a world with every pipeline healthy and queues empty.

    ``allocations`` maps pipeline id -> stage id -> units; omitted stages
    start at their minimum allocation. Structural problems in any pipeline
    spec are rejected here rather than surfacing mid-run.
    """

    states: dict[str, PipelineState] = {}
    for spec in sorted(pipelines, key=lambda p: p.id):
        if spec.id in states:
            raise ValueError(f"duplicate pipeline id {spec.id!r}")
        issues = validate_pipeline_spec(spec)
        if issues:
            summary = "; ".join(f"{i.code}({i.subject})" for i in issues)
            raise ValueError(f"invalid pipeline {spec.id!r}: {summary}")
        topo = stage_topology(spec)
        downstream_map: dict[str, list[str]] = {s.id: [] for s in spec.stages}
        for s in spec.stages:
            for up in s.upstream:
                downstream_map[up].append(s.id)
        stage_states: dict[str, StageState] = {}
        for s in spec.stages:
            alloc = s.min_alloc
            if allocations and spec.id in allocations:
                alloc = allocations[spec.id].get(s.id, s.min_alloc)
            alloc = max(s.min_alloc, min(s.max_alloc, alloc))
            stage_states[s.id] = StageState(
                spec=s, alloc=alloc, downstream=tuple(sorted(downstream_map[s.id]))
            )
        states[spec.id] = PipelineState(
            spec=spec, stages=stage_states, topo=topo, schema=spec.schema
        )
    return SimWorld(
        pipelines=states,
        resource_model=resource_model,
        constants=constants or SimConstants(),
    )
