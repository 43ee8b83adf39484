"""State transition function and action application.

One ``step`` call advances the world by one tick:

1. verify record accounting (fail loudly, not silently)
2. mature pending health recoveries
3. enqueue arrivals, honouring upstream-delay suppression and release
4. fire batch triggers (a suppressed dataset fails the scheduled run)
5. divert quarantined partitions and resolve completed drift windows
6. compute contention and process queues in topological stage order
7. take checkpoints, price the tick, and emit a telemetry snapshot

Controllers mutate the world only through ``apply_action``, and only with
an ``ApprovedAction`` carrying the audit reference of its Allow/approval
decision; the runner enforces that pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from pipegov.core.actions import ActionKind, ProposedAction
from pipegov.core.pipeline import PipelineKind
from pipegov.core.schema import SchemaError, apply_delta
from pipegov.simkernel.world import (
    Cohort,
    Health,
    PipelineSample,
    PipelineState,
    SimWorld,
    StageState,
    TelemetrySnapshot,
    TickReport,
)


class InconsistentWorld(RuntimeError):
    pass


class InvalidTarget(ValueError):
    pass


class IllegalTransition(ValueError):
    pass


@dataclass(frozen=True)
class ApprovedAction:
    action: ProposedAction
    decision_ref: int  # audit seq of the Allow or approval record


@dataclass(frozen=True)
class ActionOutcome:
    action_id: str
    kind: ActionKind
    pipeline: str
    status: str  # "applied" | "failed"
    detail: str
    effects: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "action_id": self.action_id,
            "kind": self.kind.value,
            "pipeline": self.pipeline,
            "status": self.status,
            "detail": self.detail,
            "effects": self.effects,
        }

    @property
    def applied(self) -> bool:
        return self.status == "applied"


def effective_rate(base_rate: int, alloc: int, contention_factor: float) -> int:
    return math.floor(base_rate * alloc * contention_factor)


def _contended_rate(base_rate: int, alloc: int, capacity: int, busy_alloc: int) -> int:
    """Rate under fair-share contention, in exact integer arithmetic.

    Equivalent to effective_rate with factor = capacity / busy_alloc but
    immune to float rounding when the product is an exact integer.
    """

    if busy_alloc <= capacity:
        return base_rate * alloc
    return (base_rate * alloc * capacity) // busy_alloc


def compute_tick_cost(world: SimWorld, materialized_this_tick: int = 0) -> float:
    """Allocation cost plus storage for records materialized this tick.

    Halted and deferred pipelines release their allocation and accrue no
    compute cost; failing pipelines keep paying for their reserved units.
    """

    compute = 0
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        if p.health in (Health.HALTED, Health.DEFERRED):
            continue
        compute += p.allocation_total()
    return (
        compute * world.resource_model.unit_price
        + materialized_this_tick * world.resource_model.storage_price
    )


def check_accounting(world: SimWorld) -> None:
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        if not p.accounting_holds():
            raise InconsistentWorld(
                f"pipeline {pid}: ingress {p.ingress} != materialized {p.materialized} "
                f"+ queued {p.queued()} + quarantined {p.quarantined} + dropped {p.dropped}"
            )


def _enqueue(p: PipelineState, tick: int, count: int) -> int:
    """Add arrivals to the entry stage; returns how many were enqueued."""

    if count <= 0:
        return 0
    partition = None
    drift = p.pending_drift
    if drift is not None and tick <= drift.window_end:
        partition = drift.partition
    p.entry_stage().queue.append(Cohort(tick, count, partition))
    p.ingress += count
    return count


def _divert_quarantined(p: PipelineState) -> int:
    drift = p.pending_drift
    if drift is None or not drift.quarantine_mode:
        return 0
    moved = 0
    for sid in p.topo:
        stage = p.stages[sid]
        kept: list[Cohort] = []
        for cohort in stage.queue:
            if cohort.partition == drift.partition:
                moved += cohort.count
            else:
                kept.append(cohort)
        if moved:
            stage.queue.clear()
            stage.queue.extend(kept)
    p.quarantined += moved
    return moved


def _tagged_records(p: PipelineState, partition: str) -> int:
    return sum(
        c.count for s in p.stages.values() for c in s.queue if c.partition == partition
    )


def _clear_tags(p: PipelineState, partition: str) -> None:
    for stage in p.stages.values():
        for cohort in stage.queue:
            if cohort.partition == partition:
                cohort.partition = None


def step(world: SimWorld, arrivals: dict[str, int]) -> TickReport:
    """Advance the world one tick. Fault state must already be injected."""

    check_accounting(world)
    t = world.tick
    failures: list[dict] = list(world.pending_failures)
    transitions: list[dict] = list(world.pending_transitions)
    world.pending_failures = []
    world.pending_transitions = []

    world.capacity_reductions = [(until, u) for until, u in world.capacity_reductions if t < until]
    capacity_now = world.effective_capacity(t)

    # 1. recoveries mature
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        if p.recover_at is not None and t >= p.recover_at:
            old = p.health
            p.health = p.recover_to
            p.recover_at = None
            if p.health is Health.HEALTHY:
                p.failing_cause = None
                p.failing_stage = None
            transitions.append(
                {"tick": t, "pipeline": pid, "event": "health", "from": old.value, "to": p.health.value}
            )

    # 2. arrivals, suppression, release, batch triggers
    ingress_now: dict[str, int] = {}
    suppressed_now: dict[str, bool] = {}
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        raw = arrivals.get(pid, 0)
        active_suppression = p.suppress_until is not None and t < p.suppress_until
        suppressed_now[pid] = active_suppression
        enq = 0
        if active_suppression:
            p.withheld += raw
        else:
            enq += _enqueue(p, t, raw)

        # Delay expired: declare the missing fraction dropped and spread the
        # rest uniformly over the next release_span ticks.
        if p.suppress_until is not None and t >= p.suppress_until and p.withheld > 0:
            missing = math.floor(p.withheld * p.missing_fraction)
            if missing:
                p.ingress += missing
                p.dropped += missing
            remaining = p.withheld - missing
            p.withheld = 0
            span = max(1, world.constants.release_span)
            base, extra = divmod(remaining, span)
            for i in range(span):
                share = base + (1 if i < extra else 0)
                if share:
                    p.release_plan.append((t + i, share))
        while p.release_plan and p.release_plan[0][0] <= t:
            _, count = p.release_plan.popleft()
            enq += _enqueue(p, t, count)
        if p.suppress_until is not None and t >= p.suppress_until and not p.release_plan:
            p.suppress_until = None
            p.missing_fraction = 0.0
        ingress_now[pid] = enq

        if (
            p.spec.kind is PipelineKind.BATCH
            and p.spec.schedule_period
            and t > 0
            and t % p.spec.schedule_period == 0
            and active_suppression
            and p.health in (Health.HEALTHY, Health.FAILING)
        ):
            if p.health is Health.HEALTHY:
                p.health = Health.FAILING
                transitions.append(
                    {"tick": t, "pipeline": pid, "event": "health", "from": "Healthy", "to": "Failing"}
                )
            p.failing_cause = "missing_input"
            failures.append({"tick": t, "pipeline": pid, "kind": "missing_input", "stage": p.topo[0]})

    # 3. quarantine diversion and drift-window resolution
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        drift = p.pending_drift
        if drift is None:
            continue
        if drift.quarantine_mode:
            moved = _divert_quarantined(p)
            if moved:
                transitions.append(
                    {"tick": t, "pipeline": pid, "event": "quarantined", "records": moved, "partition": drift.partition}
                )
            if t > drift.window_end and _tagged_records(p, drift.partition) == 0:
                p.pending_drift = None
                transitions.append(
                    {"tick": t, "pipeline": pid, "event": "drift_resolved", "partition": drift.partition}
                )

    # 4. contention from busy allocation
    busy_alloc = 0
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        if not p.processing_allowed(t):
            continue
        for sid in p.topo:
            stage = p.stages[sid]
            if stage.queue:
                busy_alloc += stage.alloc
    if busy_alloc > capacity_now:
        factor = capacity_now / busy_alloc
    else:
        factor = 1.0

    # 5. processing
    materialized_now = 0
    rates: dict[str, int] = {}
    processed_total: dict[str, int] = {}
    capacity_total: dict[str, int] = {}
    stage_processed: dict[str, dict[str, int]] = {}
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        pipeline_rates: list[int] = []
        processed_total[pid] = 0
        capacity_total[pid] = 0
        stage_processed[pid] = {}
        allowed = p.processing_allowed(t)
        for sid in p.topo:
            stage = p.stages[sid]
            rate = (
                _contended_rate(stage.spec.base_rate, stage.alloc, capacity_now, busy_alloc)
                if allowed
                else 0
            )
            pipeline_rates.append(rate)
            if not allowed or rate <= 0:
                continue
            if stage.queue:
                capacity_total[pid] += rate
            remaining = rate
            processed_cohorts: list[Cohort] = []
            while remaining > 0 and stage.queue:
                head = stage.queue[0]
                take = min(head.count, remaining)
                if take == head.count:
                    stage.queue.popleft()
                else:
                    head.count -= take
                remaining -= take
                processed_cohorts.append(Cohort(head.arrival_tick, take, head.partition))
            done = rate - remaining
            if done == 0:
                continue
            stage_processed[pid][sid] = done
            processed_total[pid] += done
            if stage.downstream:
                # Route each processed cohort to the least-loaded downstream
                # queue (ties by id order): conservation-preserving routing.
                for cohort in processed_cohorts:
                    target_id = min(stage.downstream, key=lambda d: (p.stages[d].depth(), d))
                    p.stages[target_id].queue.append(cohort)
                    stage.forwarded_since_checkpoint[target_id] = (
                        stage.forwarded_since_checkpoint.get(target_id, 0) + cohort.count
                    )
            else:
                for cohort in processed_cohorts:
                    p.materialized += cohort.count
                    materialized_now += cohort.count
                    lag = t - cohort.arrival_tick
                    p.lag_histogram[lag] = p.lag_histogram.get(lag, 0) + cohort.count
                    if cohort.arrival_tick > p.newest_materialized_arrival:
                        p.newest_materialized_arrival = cohort.arrival_tick
                    p.materialized_since_checkpoint.append(cohort)
        rates[pid] = min(pipeline_rates) if pipeline_rates else 0

    # 6. checkpoints
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        for sid in p.topo:
            stage = p.stages[sid]
            if t > 0 and t % stage.spec.checkpoint_interval == 0:
                stage.forwarded_since_checkpoint.clear()
                stage.last_checkpoint_tick = t
        sink = p.sink_stage()
        if t > 0 and t % sink.spec.checkpoint_interval == 0:
            p.materialized_since_checkpoint.clear()

    # 7. price and snapshot
    cost = compute_tick_cost(world, materialized_now)
    samples: dict[str, PipelineSample] = {}
    failure_counts: dict[str, int] = {}
    for f in failures:
        failure_counts[f["pipeline"]] = failure_counts.get(f["pipeline"], 0) + 1
    for pid in world.pipeline_ids():
        p = world.pipelines[pid]
        util = 0.0
        if capacity_total[pid] > 0:
            util = min(1.0, processed_total[pid] / capacity_total[pid])
        samples[pid] = PipelineSample(
            queue_depth=p.queued(),
            effective_rate=rates[pid],
            freshness_lag=t - p.newest_materialized_arrival,
            failure_count=failure_counts.get(pid, 0),
            utilization=util,
            allocation=p.allocation_total(),
            ingress=ingress_now[pid],
            health=p.health.value,
            suppressed=suppressed_now[pid],
        )
    snapshot = TelemetrySnapshot(
        tick=t,
        pipelines=samples,
        total_cost=cost,
        capacity=capacity_now,
        capacity_headroom=capacity_now - busy_alloc,
        contention_factor=factor,
    )
    world.tick = t + 1
    return TickReport(
        tick=t,
        snapshot=snapshot,
        failures=tuple(failures),
        transitions=tuple(transitions),
        materialized=materialized_now,
        cost=cost,
        stage_processed=stage_processed,
    )


def _get_pipeline(world: SimWorld, pipeline_id: str) -> PipelineState:
    p = world.pipelines.get(pipeline_id)
    if p is None:
        raise InvalidTarget(f"unknown pipeline {pipeline_id!r}")
    return p


def _target_stages(p: PipelineState, stage_id: str | None) -> list[StageState]:
    if stage_id is None:
        return [p.stages[sid] for sid in p.topo]
    if stage_id not in p.stages:
        raise InvalidTarget(f"pipeline {p.spec.id!r} has no stage {stage_id!r}")
    return [p.stages[stage_id]]


def _pull_back_forwarded(p: PipelineState, stage: StageState) -> int:
    """Undo post-checkpoint forwards that are still queued downstream.

    Reprocessing after a failure must not duplicate records: whatever the
    failed stage forwarded since its checkpoint and is still waiting
    downstream is moved back; anything already materialized stays (sinks
    are idempotent).
    """

    pulled = 0
    for target_id, count in sorted(stage.forwarded_since_checkpoint.items()):
        target = p.stages[target_id]
        to_pull = min(count, target.depth())
        taken: list[Cohort] = []
        while to_pull > 0 and target.queue:
            tail = target.queue[-1]
            take = min(tail.count, to_pull)
            if take == tail.count:
                target.queue.pop()
            else:
                tail.count -= take
            to_pull -= take
            taken.append(Cohort(tail.arrival_tick, take, tail.partition))
        for cohort in reversed(taken):
            stage.queue.append(cohort)
            pulled += cohort.count
    stage.forwarded_since_checkpoint.clear()
    return pulled


def apply_action(world: SimWorld, approved: ApprovedAction) -> ActionOutcome:
    """Apply a policy-approved action to the world.

    Raises InvalidTarget for unknown pipelines/stages and IllegalTransition
    for requests that make no sense in the current health state. A legal
    attempt that cannot succeed yet (for example a replay while input data
    is still missing) returns a failed outcome instead of raising, so
    retry layers can count it.
    """

    action = approved.action
    t = world.tick
    p = _get_pipeline(world, action.pipeline)
    kind = action.kind

    def outcome(status: str, detail: str, **effects) -> ActionOutcome:
        return ActionOutcome(action.id, kind, action.pipeline, status, detail, dict(effects))

    if kind in (ActionKind.SCALE_UP, ActionKind.SCALE_DOWN):
        magnitude = abs(action.delta_units)
        if magnitude == 0:
            raise IllegalTransition("scaling action requires a non-zero delta_units")
        stages = _target_stages(p, action.stage)
        changes: dict[str, int] = {}
        clamped = False
        for stage in stages:
            want = stage.alloc + magnitude if kind is ActionKind.SCALE_UP else stage.alloc - magnitude
            new = max(stage.spec.min_alloc, min(stage.spec.max_alloc, want))
            if new != want:
                clamped = True
            changes[stage.spec.id] = new
            stage.alloc = new
        world.pending_transitions.append(
            {"tick": t, "pipeline": action.pipeline, "event": "allocation", "stages": changes}
        )
        return outcome("applied", "allocation updated", allocations=changes, clamped=clamped)

    if kind is ActionKind.REPLAY:
        if p.health is not Health.FAILING:
            raise IllegalTransition(f"Replay on {p.health.value} pipeline {action.pipeline!r}")
        if p.recover_at is not None:
            return outcome("failed", "recovery already in progress")
        if p.failing_cause == "schema_drift":
            return outcome("failed", "schema change unresolved; replay cannot clear it")
        if p.failing_cause == "missing_input":
            if p.suppress_until is not None or p.withheld > 0 or p.release_plan:
                return outcome("failed", "input data still unavailable")
            p.recover_at = t + world.constants.replay_latency
            p.recover_to = Health.HEALTHY
            return outcome("applied", "input complete; rerun scheduled", healthy_at=p.recover_at)
        stage = p.stages.get(p.failing_stage or "", None) or p.entry_stage()
        pulled = _pull_back_forwarded(p, stage)
        p.recover_at = t + world.constants.replay_latency
        p.recover_to = Health.HEALTHY
        return outcome("applied", "replaying from checkpoint", requeued=pulled, healthy_at=p.recover_at)

    if kind is ActionKind.ROLLBACK:
        if p.health in (Health.HALTED, Health.DEFERRED):
            raise IllegalTransition(f"Rollback on {p.health.value} pipeline {action.pipeline!r}")
        cohorts = p.materialized_since_checkpoint
        requeued = sum(c.count for c in cohorts)
        entry = p.entry_stage()
        for cohort in cohorts:
            entry.queue.append(Cohort(t, cohort.count, cohort.partition))
        p.materialized -= requeued
        p.materialized_since_checkpoint = []
        p.paused_until = max(p.paused_until, t + world.constants.rollback_latency)
        world.pending_transitions.append(
            {"tick": t, "pipeline": action.pipeline, "event": "rollback", "records": requeued}
        )
        return outcome("applied", "output since checkpoint invalidated", requeued=requeued)

    if kind is ActionKind.PARTIAL_RECOMPUTE:
        if action.partition is None:
            raise IllegalTransition("PartialRecompute requires a partition")
        if p.health in (Health.HALTED, Health.DEFERRED):
            raise IllegalTransition(f"PartialRecompute on {p.health.value} pipeline")
        kept: list[Cohort] = []
        requeued = 0
        entry = p.entry_stage()
        for cohort in p.materialized_since_checkpoint:
            if cohort.partition == action.partition:
                entry.queue.append(Cohort(t, cohort.count, cohort.partition))
                requeued += cohort.count
            else:
                kept.append(cohort)
        p.materialized_since_checkpoint = kept
        p.materialized -= requeued
        p.paused_until = max(
            p.paused_until, t + world.constants.recompute_latency_per_partition
        )
        return outcome("applied", f"partition {action.partition!r} recompute", requeued=requeued)

    if kind is ActionKind.QUARANTINE_PARTITION:
        drift = p.pending_drift
        if drift is None:
            raise IllegalTransition(f"no drifted partition pending on {action.pipeline!r}")
        if action.partition is not None and action.partition != drift.partition:
            raise InvalidTarget(
                f"pending drifted partition is {drift.partition!r}, not {action.partition!r}"
            )
        drift.quarantine_mode = True
        moved = _divert_quarantined(p)
        if p.health is Health.FAILING and p.failing_cause == "schema_drift":
            p.recover_at = t + world.constants.quarantine_latency
            p.recover_to = Health.HEALTHY
        if world.tick > drift.window_end and _tagged_records(p, drift.partition) == 0:
            p.pending_drift = None
        world.pending_transitions.append(
            {"tick": t, "pipeline": action.pipeline, "event": "quarantine", "records": moved, "partition": drift.partition}
        )
        return outcome("applied", "partition isolated", quarantined=moved, partition=drift.partition)

    if kind is ActionKind.DEFER:
        if p.health is Health.DEFERRED:
            raise IllegalTransition(f"Defer on already deferred pipeline {action.pipeline!r}")
        if p.health is Health.HALTED:
            raise IllegalTransition(f"Defer on halted pipeline {action.pipeline!r}")
        old = p.health
        p.health = Health.DEFERRED
        p.failing_cause = None
        p.failing_stage = None
        p.recover_at = None
        world.pending_transitions.append(
            {"tick": t, "pipeline": action.pipeline, "event": "health", "from": old.value, "to": "Deferred"}
        )
        return outcome("applied", f"deferred until {action.condition or 'resumed'}")

    if kind is ActionKind.RESUME:
        if p.health is Health.HEALTHY:
            raise IllegalTransition(f"Resume on healthy pipeline {action.pipeline!r}")
        drift = p.pending_drift
        accepted = 0
        if drift is not None and not drift.quarantine_mode:
            # Resuming past a drift accepts the new schema: tagged records
            # become ordinary work (auto-mapped at read time).
            accepted = _tagged_records(p, drift.partition)
            _clear_tags(p, drift.partition)
            try:
                p.schema = apply_delta(p.schema, drift.delta)
            except SchemaError:
                pass  # schema moved on since the drift; keep the current one
            p.pending_drift = None
        old = p.health
        p.failing_cause = None
        p.failing_stage = None
        p.recover_at = t + world.constants.resume_latency
        p.recover_to = Health.HEALTHY
        world.pending_transitions.append(
            {"tick": t, "pipeline": action.pipeline, "event": "resume", "from": old.value}
        )
        return outcome("applied", "resume scheduled", accepted_records=accepted, healthy_at=p.recover_at)

    if kind is ActionKind.HALT:
        if p.health is Health.HALTED:
            raise IllegalTransition(f"Halt on already halted pipeline {action.pipeline!r}")
        old = p.health
        p.health = Health.HALTED
        p.recover_at = None
        world.pending_transitions.append(
            {"tick": t, "pipeline": action.pipeline, "event": "health", "from": old.value, "to": "Halted"}
        )
        return outcome("applied", "pipeline halted")

    raise InvalidTarget(f"unknown action kind {kind!r}")
