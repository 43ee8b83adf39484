"""The control loop that governs a running cluster.

One chassis serves both controller modes. Every tick it:

1. executes operator work that has come due (approval grants, scheduled
   operator fixes),
2. opens incidents from hard triggers (injected faults, failure events,
   freshness breaches) and closes incidents whose exit conditions hold,
3. if agents are enabled, builds one ObservationBundle per agent and
   collects candidate actions from the reasoning backend (monitoring
   first, then schema, recovery, optimization),
4. sweeps unclaimed incidents into the retry/escalation fallback — with
   agents disabled this *is* the controller: bounded replays, then a
   simulated human operator after ``operator_delay`` ticks,
5. validates every proposal against the governance policy and applies
   the allowed ones to the world, recording proposal, decision, and
   outcome in the hash-chained audit log.

The static baseline is therefore literally this class with the agent
set empty: identical detection, identical fallback, identical policy
gate, identical audit trail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core.actions import (
    AGENT_ACTION_TABLE,
    SCALING_KINDS,
    ActionKind,
    Actor,
    ProposedAction,
)
from ..core.pipeline import ResourceModel
from ..policy.engine import ValidationContext, Verdict, validate_action
from ..policy.model import PolicyDocument
from ..scenario.model import FaultEvent, FaultKind
from ..simkernel.kernel import (
    ActionOutcome,
    ApprovedAction,
    IllegalTransition,
    InvalidTarget,
    apply_action,
)
from ..simkernel.world import Health, SimWorld, TickReport
from ..telemetry.audit import AuditLog
from ..telemetry.incidents import CLUSTER_PIPELINE, IncidentClass, IncidentRegistry
from ..telemetry.metrics import MetricStore, UnknownSeries
from .backends import BackendError, BuiltinBackend, ReasoningBackend
from .bundle import CandidateAction, ObservationBundle, OutcomeMemory
from .monitoring import AnomalyDetector, AnomalyFlag

INGRESS_EWMA_ALPHA = 0.2  # smoothing for the pre-incident ingress baseline
UTILIZATION_WINDOW = 30  # ticks of utilization history shown to agents
INGRESS_WINDOW = 20  # ticks of ingress history shown to agents

# Reasoning phases, in the order they run each tick.
AGENT_PHASES = (
    Actor.MONITORING_AGENT,
    Actor.SCHEMA_AGENT,
    Actor.RECOVERY_AGENT,
    Actor.OPTIMIZATION_AGENT,
)

_OPERATOR_CLAIM = "operator"


@dataclass(frozen=True)
class OperatorModel:
    """Retry budget and human-response latency for the fallback path."""

    max_retries: int = 3
    retry_backoff: int = 5
    operator_delay: int = 120


@dataclass
class _RetryState:
    used: int = 0
    next_at: int = 0


@dataclass(frozen=True)
class _PendingApproval:
    due: int
    action: ProposedAction
    request_ref: int


@dataclass(frozen=True)
class _OperatorTask:
    due: int
    kind: ActionKind
    pipeline: str
    incident_id: str


@dataclass(frozen=True)
class ControlReport:
    """What the controller did in one tick."""

    tick: int
    proposals: tuple[ProposedAction, ...]
    outcomes: tuple[dict, ...]
    flags: tuple[AnomalyFlag, ...]
    opened: tuple[str, ...]
    closed: tuple[str, ...]
    interventions_total: int


class Controller:
    """Shared control chassis for both the static and agentic modes."""

    def __init__(
        self,
        policy: PolicyDocument,
        resource_model: ResourceModel,
        audit: AuditLog,
        registry: IncidentRegistry,
        store: MetricStore,
        backend: ReasoningBackend | None = None,
        agents_enabled: bool = False,
        operator: OperatorModel | None = None,
    ) -> None:
        self.policy = policy
        self.resource_model = resource_model
        self.audit = audit
        self.registry = registry
        self.store = store
        self.agents_enabled = agents_enabled
        self.backend: ReasoningBackend = backend or BuiltinBackend()
        self.operator = operator or OperatorModel()
        self.memory = OutcomeMemory()
        self.interventions = 0

        self._builtin = BuiltinBackend()
        self._detector = AnomalyDetector()
        self._action_seq = 0
        self._seen_incidents: set[str] = set()
        self._claims: dict[str, str] = {}
        self._denied: dict[str, set[str]] = {}
        self._failed: set[str] = set()
        self._retries: dict[str, _RetryState] = {}
        self._last_applied: dict[str, str] = {}
        self._last_action_tick: dict[str, int] = {}
        self._approval_pending: set[str] = set()
        self._approvals: list[_PendingApproval] = []
        self._operator_tasks: list[_OperatorTask] = []
        self._ingress_ewma: dict[str, float] = {}
        self._delay_baseline: dict[str, float] = {}
        self._alloc_changed_at: dict[str, int] = {}
        self._window_index: int | None = None
        self._window_spend = 0.0

    # ------------------------------------------------------------------
    # main entry points

    def tick(
        self,
        world: SimWorld,
        t: int,
        applied_faults: list[FaultEvent],
        prev_report: TickReport | None,
    ) -> ControlReport:
        """Run one control cycle. Called after fault injection, before step."""

        outcomes: list[dict] = []
        flags: list[AnomalyFlag] = []
        opened: list[str] = []
        closed: list[str] = []
        proposals: list[ProposedAction] = []

        if prev_report is not None:
            self._fold_statistics(prev_report)

        self._run_due_approvals(world, t, outcomes)
        self._run_due_operator_tasks(world, t, outcomes)
        self._detect(world, t, applied_faults, prev_report, opened, outcomes)
        self._close_matured(world, t, prev_report, closed, outcomes)

        if self.agents_enabled:
            flags.extend(self._monitoring_phase(t, prev_report, outcomes))
            parts = self._bundle_parts(world, t, prev_report, applied_faults)
            for actor in AGENT_PHASES[1:]:
                bundle = self._build_bundle(t, actor, parts)
                candidates = self._decide(bundle, outcomes)
                for candidate in candidates:
                    action = self._screen_candidate(world, t, actor, candidate, outcomes)
                    if action is not None:
                        proposals.append(action)

        self._fallback_sweep(world, t, proposals, outcomes)

        for action in proposals:
            self._validate_and_execute(world, t, action, outcomes)

        return ControlReport(
            tick=t,
            proposals=tuple(proposals),
            outcomes=tuple(outcomes),
            flags=tuple(flags),
            opened=tuple(opened),
            closed=tuple(closed),
            interventions_total=self.interventions,
        )

    def observe_report(self, report: TickReport) -> None:
        """Account the tick's compute spend into the current budget window."""

        window = self.policy.cost.window
        idx = report.tick // window
        if idx != self._window_index:
            self._window_index = idx
            self._window_spend = 0.0
        compute = report.cost - report.materialized * self.resource_model.storage_price
        self._window_spend += compute

    # ------------------------------------------------------------------
    # chassis statistics

    def _fold_statistics(self, prev_report: TickReport) -> None:
        for pid, sample in prev_report.snapshot.pipelines.items():
            value = float(sample.ingress)
            if pid not in self._ingress_ewma:
                self._ingress_ewma[pid] = value
            else:
                mu = self._ingress_ewma[pid]
                self._ingress_ewma[pid] = mu + INGRESS_EWMA_ALPHA * (value - mu)

    # ------------------------------------------------------------------
    # incident detection and closure

    def _note_incident(
        self,
        incident_id: str,
        opened: list[str],
        outcomes: list[dict],
        t: int,
    ) -> None:
        if incident_id in self._seen_incidents:
            return
        self._seen_incidents.add(incident_id)
        incident = self.registry.get(incident_id)
        payload = {
            "kind": "outcome",
            "event": "incident_opened",
            "incident": incident.to_dict(),
        }
        self.audit.append(t, Actor.POLICY_ENGINE, payload, self.policy.version)
        outcomes.append(payload)
        opened.append(incident_id)

    def _detect(
        self,
        world: SimWorld,
        t: int,
        applied_faults: list[FaultEvent],
        prev_report: TickReport | None,
        opened: list[str],
        outcomes: list[dict],
    ) -> None:
        for event in applied_faults:
            if event.kind is FaultKind.SCHEMA_DRIFT:
                pipeline = world.pipelines[event.pipeline]
                if pipeline.pending_drift is not None:
                    inc = self.registry.open_incident(
                        event.pipeline, IncidentClass.SCHEMA_INCOMPATIBLE, t
                    )
                    self._note_incident(inc.id, opened, outcomes, t)
            elif event.kind is FaultKind.UPSTREAM_DELAY:
                inc = self.registry.open_incident(
                    event.pipeline, IncidentClass.UPSTREAM_DELAY, t
                )
                self._delay_baseline.setdefault(
                    inc.id, self._ingress_ewma.get(event.pipeline, 0.0)
                )
                self._note_incident(inc.id, opened, outcomes, t)
            elif event.kind is FaultKind.RESOURCE_CONTENTION:
                inc = self.registry.open_incident(
                    CLUSTER_PIPELINE, IncidentClass.RESOURCE_CONTENTION, t
                )
                self._note_incident(inc.id, opened, outcomes, t)
            elif event.kind is FaultKind.TRANSIENT_TASK_FAILURE:
                inc = self.registry.open_incident(
                    event.pipeline, IncidentClass.TRANSIENT_TASK_FAILURE, t
                )
                self._failed.add(inc.id)
                self._note_incident(inc.id, opened, outcomes, t)

        if prev_report is None:
            return

        for failure in prev_report.failures:
            pid = failure["pipeline"]
            kind = failure["kind"]
            if kind == "task_failure":
                inc = self.registry.open_incident(
                    pid, IncidentClass.TRANSIENT_TASK_FAILURE, t
                )
            elif kind == "missing_input":
                inc = self.registry.open_incident(pid, IncidentClass.UPSTREAM_DELAY, t)
                self._delay_baseline.setdefault(inc.id, self._ingress_ewma.get(pid, 0.0))
            elif kind == "schema_drift":
                inc = self.registry.open_incident(
                    pid, IncidentClass.SCHEMA_INCOMPATIBLE, t
                )
            else:
                continue
            self._failed.add(inc.id)
            self._note_incident(inc.id, opened, outcomes, t)

        tolerance = self.policy.freshness.breach_tolerance
        for pid, sample in prev_report.snapshot.pipelines.items():
            target = world.pipelines[pid].spec.freshness_target
            if target is None:
                continue
            if sample.freshness_lag > target + tolerance:
                inc = self.registry.open_incident(pid, IncidentClass.FRESHNESS_BREACH, t)
                self._note_incident(inc.id, opened, outcomes, t)

    def _close_matured(
        self,
        world: SimWorld,
        t: int,
        prev_report: TickReport | None,
        closed: list[str],
        outcomes: list[dict],
    ) -> None:
        prev_snap = prev_report.snapshot if prev_report is not None else None
        for incident in list(self.registry.open_incidents()):
            if incident.detected_tick >= t:
                continue
            cls = IncidentClass(incident.incident_class)
            done = False
            if cls is IncidentClass.SCHEMA_INCOMPATIBLE:
                p = world.pipelines[incident.pipeline]
                done = p.health is Health.HEALTHY and (
                    p.pending_drift is None or p.pending_drift.quarantine_mode
                )
            elif cls is IncidentClass.TRANSIENT_TASK_FAILURE:
                done = world.pipelines[incident.pipeline].health is Health.HEALTHY
            elif cls is IncidentClass.UPSTREAM_DELAY:
                p = world.pipelines[incident.pipeline]
                done = (
                    p.suppress_until is None
                    and not p.release_plan
                    and p.withheld == 0
                    and p.health is Health.HEALTHY
                )
            elif cls is IncidentClass.RESOURCE_CONTENTION:
                done = prev_snap is not None and prev_snap.capacity_headroom >= 0
            elif cls is IncidentClass.FRESHNESS_BREACH:
                target = world.pipelines[incident.pipeline].spec.freshness_target
                if prev_snap is not None and target is not None:
                    done = prev_snap.pipelines[incident.pipeline].freshness_lag <= target
            if not done:
                continue
            resolution = self._last_applied.get(incident.id)
            self.registry.close_incident(incident.id, t, resolution)
            duration = t - incident.detected_tick
            if resolution is not None:
                self.memory.record_success(cls.value, resolution, duration)
            payload = {
                "kind": "outcome",
                "event": "incident_closed",
                "incident": incident.to_dict(),
            }
            self.audit.append(t, Actor.POLICY_ENGINE, payload, self.policy.version)
            outcomes.append(payload)
            closed.append(incident.id)
            self._forget_incident(incident.id)

    def _forget_incident(self, incident_id: str) -> None:
        self._claims.pop(incident_id, None)
        self._denied.pop(incident_id, None)
        self._failed.discard(incident_id)
        self._retries.pop(incident_id, None)
        self._last_applied.pop(incident_id, None)
        self._last_action_tick.pop(incident_id, None)
        self._approval_pending.discard(incident_id)
        self._delay_baseline.pop(incident_id, None)

    # ------------------------------------------------------------------
    # agent phases

    def _monitoring_phase(
        self, t: int, prev_report: TickReport | None, outcomes: list[dict]
    ) -> list[AnomalyFlag]:
        if prev_report is None:
            return []
        flags = self._detector.observe_snapshot(t, prev_report.snapshot.to_dict())
        for flag in flags:
            payload = {"kind": "outcome", "event": "anomaly_flag", "flag": flag.to_dict()}
            self.audit.append(t, Actor.MONITORING_AGENT, payload, self.policy.version)
            outcomes.append(payload)
        return flags

    def _decide(
        self, bundle: ObservationBundle, outcomes: list[dict]
    ) -> list[CandidateAction]:
        try:
            candidates = self.backend.decide(bundle)
            if not isinstance(candidates, list) or not all(
                isinstance(c, CandidateAction) for c in candidates
            ):
                raise BackendError("backend response is not a list of candidate actions")
            return candidates
        except (BackendError, ValueError) as exc:
            payload = {
                "kind": "outcome",
                "event": "backend_violation",
                "agent": bundle.agent,
                "error": str(exc),
            }
            self.audit.append(bundle.tick, Actor.POLICY_ENGINE, payload, self.policy.version)
            outcomes.append(payload)
            return self._builtin.decide(bundle)

    def _screen_candidate(
        self,
        world: SimWorld,
        t: int,
        actor: Actor,
        candidate: CandidateAction,
        outcomes: list[dict],
    ) -> ProposedAction | None:
        def violation(reason: str) -> None:
            payload = {
                "kind": "outcome",
                "event": "backend_violation",
                "agent": actor.value,
                "candidate": candidate.to_dict(),
                "error": reason,
            }
            self.audit.append(t, Actor.POLICY_ENGINE, payload, self.policy.version)
            outcomes.append(payload)

        try:
            kind = ActionKind(candidate.kind)
        except ValueError:
            violation(f"unknown action kind {candidate.kind!r}")
            return None
        if kind not in AGENT_ACTION_TABLE[actor]:
            violation(f"{actor.value} may not emit {kind.value}")
            return None
        if candidate.pipeline not in world.pipelines:
            violation(f"unknown pipeline {candidate.pipeline!r}")
            return None
        if kind in SCALING_KINDS and candidate.delta_units <= 0:
            violation("scaling candidate requires positive delta_units")
            return None
        incident_id = candidate.incident_id
        if incident_id is not None:
            owner = self._claims.get(incident_id)
            if owner not in (None, actor.value):
                return None  # someone else is already handling it
            if kind.value in self._denied.get(incident_id, set()):
                return None  # policy already denied this remedy
        action = self._next_action(
            t,
            actor,
            kind,
            candidate.pipeline,
            stage=candidate.stage,
            partition=candidate.partition,
            delta_units=candidate.delta_units,
            condition=candidate.condition,
            justification=candidate.rationale,
            incident_id=incident_id,
        )
        if incident_id is not None:
            self._claims[incident_id] = actor.value
        return action

    def _next_action(
        self,
        t: int,
        actor: Actor,
        kind: ActionKind,
        pipeline: str,
        *,
        stage: str | None = None,
        partition: str | None = None,
        delta_units: int = 0,
        condition: str | None = None,
        justification: str = "",
        incident_id: str | None = None,
    ) -> ProposedAction:
        self._action_seq += 1
        return ProposedAction(
            id=f"ACT-{self._action_seq:05d}",
            tick=t,
            agent=actor,
            kind=kind,
            pipeline=pipeline,
            stage=stage,
            partition=partition,
            delta_units=delta_units,
            condition=condition,
            justification=justification,
            incident_id=incident_id,
        )

    # ------------------------------------------------------------------
    # fallback: bounded retries, then a human

    def _fallback_sweep(
        self, world: SimWorld, t: int, proposals: list[ProposedAction], outcomes: list[dict]
    ) -> None:
        for incident in self.registry.open_incidents():
            owner = self._claims.get(incident.id)
            cls = IncidentClass(incident.incident_class)
            if cls is IncidentClass.SCHEMA_INCOMPATIBLE:
                if owner is None:
                    self._enqueue_operator_task(
                        t, ActionKind.RESUME, incident.pipeline, incident.id, outcomes
                    )
            elif cls in (
                IncidentClass.TRANSIENT_TASK_FAILURE,
                IncidentClass.UPSTREAM_DELAY,
            ):
                if incident.id not in self._failed:
                    continue
                if owner not in (None, Actor.BASELINE.value):
                    continue
                pipeline = world.pipelines[incident.pipeline]
                if pipeline.health is not Health.FAILING:
                    continue
                state = self._retries.setdefault(incident.id, _RetryState(next_at=t))
                if t < state.next_at:
                    continue
                if state.used < self.operator.max_retries:
                    state.used += 1
                    state.next_at = t + self.operator.retry_backoff
                    self._claims[incident.id] = Actor.BASELINE.value
                    proposals.append(
                        self._next_action(
                            t,
                            Actor.BASELINE,
                            ActionKind.REPLAY,
                            incident.pipeline,
                            justification=(
                                f"automatic retry {state.used}/{self.operator.max_retries}"
                            ),
                            incident_id=incident.id,
                        )
                    )
                else:
                    self._enqueue_operator_task(
                        t, ActionKind.REPLAY, incident.pipeline, incident.id, outcomes
                    )

    def _enqueue_operator_task(
        self,
        t: int,
        kind: ActionKind,
        pipeline: str,
        incident_id: str,
        outcomes: list[dict],
    ) -> None:
        due = t + self.operator.operator_delay
        self._operator_tasks.append(_OperatorTask(due, kind, pipeline, incident_id))
        self._claims[incident_id] = _OPERATOR_CLAIM
        self.interventions += 1
        payload = {
            "kind": "outcome",
            "event": "operator_task_enqueued",
            "incident_id": incident_id,
            "pipeline": pipeline,
            "fix": kind.value,
            "due_tick": due,
        }
        self.audit.append(t, Actor.OPERATOR, payload, self.policy.version)
        outcomes.append(payload)

    def _run_due_operator_tasks(
        self, world: SimWorld, t: int, outcomes: list[dict]
    ) -> None:
        due = [task for task in self._operator_tasks if task.due <= t]
        if not due:
            return
        self._operator_tasks = [task for task in self._operator_tasks if task.due > t]
        for task in sorted(due, key=lambda x: (x.due, x.incident_id)):
            incident = self.registry.get(task.incident_id)
            if not incident.open:
                continue  # resolved itself while the operator was paged
            action = self._next_action(
                t,
                Actor.OPERATOR,
                task.kind,
                task.pipeline,
                justification="scheduled operator intervention",
                incident_id=task.incident_id,
            )
            self._validate_and_execute(world, t, action, outcomes)

    # ------------------------------------------------------------------
    # approvals

    def _run_due_approvals(self, world: SimWorld, t: int, outcomes: list[dict]) -> None:
        due = [appr for appr in self._approvals if appr.due <= t]
        if not due:
            return
        self._approvals = [appr for appr in self._approvals if appr.due > t]
        for approval in sorted(due, key=lambda x: (x.due, x.request_ref)):
            action = approval.action
            grant = {
                "kind": "decision",
                "phase": "approval_grant",
                "action": action.to_dict(),
                "approved_ref": approval.request_ref,
                "verdict": Verdict.ALLOW.value,
                "citations": ["actions.approval_required"],
                "explanation": "operator approval granted after review delay",
            }
            record = self.audit.append(t, Actor.OPERATOR, grant, self.policy.version)
            if action.incident_id is not None:
                self._approval_pending.discard(action.incident_id)
            self._apply(world, t, action, record.seq, outcomes)

    # ------------------------------------------------------------------
    # validation and execution

    def _spend_projection(self, world: SimWorld, t: int) -> tuple[float, int]:
        """Committed spend and the horizon (ticks) used to price new units.

        Two commitments are projected and the larger governs: finishing the
        current window at today's paying allocation, and a full window at
        the total reserved allocation. The second bound matters because an
        allocation approved late in a window persists into the next one,
        and paused pipelines resume and pay again; without it a scale-up
        granted near a window boundary could overcommit the following
        window. New units are priced over a full window for the same
        reason.
        """

        window = self.policy.cost.window
        remaining = window - (t % window)
        price = self.resource_model.unit_price
        paying_units = 0
        reserved_units = 0
        for p in world.pipelines.values():
            units = p.allocation_total()
            reserved_units += units
            if p.health not in (Health.HALTED, Health.DEFERRED):
                paying_units += units
        committed = max(
            self._window_spend + paying_units * price * remaining,
            reserved_units * price * window,
        )
        return committed, window

    def _context(self, world: SimWorld, t: int, action: ProposedAction) -> ValidationContext:
        price = self.resource_model.unit_price
        committed, horizon = self._spend_projection(world, t)
        delta_total = 0
        if action.kind in SCALING_KINDS:
            pipeline = world.pipelines.get(action.pipeline)
            if pipeline is not None:
                affected = 1 if action.stage is not None else len(pipeline.stages)
                delta_total = abs(action.delta_units) * affected
        tags: tuple[str, ...] = ()
        pipeline = world.pipelines.get(action.pipeline)
        if pipeline is not None:
            tags = tuple(pipeline.spec.tags)
        return ValidationContext(
            tick=t,
            pipeline_tags=tags,
            windowed_spend=self._window_spend,
            committed_spend=committed,
            window_remaining=horizon,
            unit_price=price,
            delta_units_total=delta_total,
        )

    def _validate_and_execute(
        self, world: SimWorld, t: int, action: ProposedAction, outcomes: list[dict]
    ) -> None:
        proposal_payload = {"kind": "proposal", "action": action.to_dict()}
        self.audit.append(t, action.agent, proposal_payload, self.policy.version)

        context = self._context(world, t, action)
        decision = validate_action(self.policy, action, context)
        decision_payload = {
            "kind": "decision",
            "phase": "initial",
            "action": action.to_dict(),
            "context": context.to_dict(),
            "verdict": decision.verdict.value,
            "citations": list(decision.rule_citations),
            "explanation": decision.explanation,
        }
        record = self.audit.append(t, Actor.POLICY_ENGINE, decision_payload, self.policy.version)

        if decision.verdict is Verdict.ALLOW:
            self._apply(world, t, action, record.seq, outcomes)
        elif decision.verdict is Verdict.REQUIRE_APPROVAL:
            self._approvals.append(
                _PendingApproval(t + self.operator.operator_delay, action, record.seq)
            )
            self.interventions += 1
            if action.incident_id is not None:
                self._approval_pending.add(action.incident_id)
                self._claims[action.incident_id] = action.agent.value
        else:  # Deny
            if action.incident_id is not None:
                self._denied.setdefault(action.incident_id, set()).add(action.kind.value)
                if self._claims.get(action.incident_id) == action.agent.value:
                    del self._claims[action.incident_id]

    def _apply(
        self,
        world: SimWorld,
        t: int,
        action: ProposedAction,
        decision_ref: int,
        outcomes: list[dict],
    ) -> None:
        try:
            result = apply_action(world, ApprovedAction(action, decision_ref))
        except (InvalidTarget, IllegalTransition) as exc:
            result = ActionOutcome(
                action.id, action.kind, action.pipeline, "rejected", str(exc), {}
            )
        payload = {
            "kind": "outcome",
            "event": "action_outcome",
            "decision_ref": decision_ref,
            "result": result.to_dict(),
        }
        self.audit.append(t, action.agent, payload, self.policy.version)
        outcomes.append(payload)

        incident_id = action.incident_id
        if result.applied:
            if action.kind in SCALING_KINDS:
                self._alloc_changed_at[action.pipeline] = t
            if incident_id is not None:
                incident = self.registry.get(incident_id)
                self.memory.record_attempt(
                    IncidentClass(incident.incident_class).value, action.kind.value
                )
                self._last_applied[incident_id] = action.kind.value
                self._last_action_tick[incident_id] = t
                self._claims[incident_id] = action.agent.value
        elif incident_id is not None:
            if self._claims.get(incident_id) == action.agent.value:
                del self._claims[incident_id]

    # ------------------------------------------------------------------
    # observation bundles

    def _zero_snapshot(self, world: SimWorld) -> dict:
        capacity = world.effective_capacity(world.tick)
        pipelines = {}
        for pid in sorted(world.pipelines):
            p = world.pipelines[pid]
            pipelines[pid] = {
                "queue_depth": 0,
                "effective_rate": 0,
                "freshness_lag": 0,
                "failure_count": 0,
                "utilization": 0.0,
                "allocation": p.allocation_total(),
                "ingress": 0,
                "health": p.health.value,
                "suppressed": False,
            }
        return {
            "tick": -1,
            "pipelines": pipelines,
            "total_cost": 0.0,
            "capacity": capacity,
            "capacity_headroom": capacity,
            "contention_factor": 1.0,
        }

    def _series_window(self, pid: str, name: str, window: int) -> list[float]:
        try:
            return [value for _, value in self.store.query_window(pid, name, window)]
        except UnknownSeries:
            return []

    def _bundle_parts(
        self,
        world: SimWorld,
        t: int,
        prev_report: TickReport | None,
        applied_faults: list[FaultEvent],
    ) -> dict:
        """Assemble the per-tick observation state shared by every agent."""

        snapshot = (
            prev_report.snapshot.to_dict()
            if prev_report is not None
            else self._zero_snapshot(world)
        )

        delay_by_pipeline: dict[str, dict] = {}
        incidents: list[dict] = []
        for incident in self.registry.open_incidents():
            view = incident.to_dict()
            view["claimed_by"] = self._claims.get(incident.id)
            view["approval_pending"] = incident.id in self._approval_pending
            view["failed"] = incident.id in self._failed
            view["last_action_tick"] = self._last_action_tick.get(incident.id)
            incidents.append(view)
            if incident.incident_class == IncidentClass.UPSTREAM_DELAY.value:
                baseline = self._delay_baseline.get(incident.id)
                if baseline is not None:
                    delay_by_pipeline[incident.pipeline] = {"baseline_ingress": baseline}

        pipelines: dict[str, dict] = {}
        series: dict[str, dict[str, list[float]]] = {}
        for pid in sorted(world.pipelines):
            p = world.pipelines[pid]
            spec = p.spec
            stages = {
                sid: {
                    "alloc": st.alloc,
                    "min_alloc": st.spec.min_alloc,
                    "max_alloc": st.spec.max_alloc,
                    "base_rate": st.spec.base_rate,
                }
                for sid, st in p.stages.items()
            }
            drift = None
            if p.pending_drift is not None:
                drift = {
                    "partition": p.pending_drift.partition,
                    "window_end": p.pending_drift.window_end,
                    "quarantine_mode": p.pending_drift.quarantine_mode,
                    "compatible": not p.pending_drift.incompatible,
                    "delta": p.pending_drift.delta.to_dict(),
                }
            pipelines[pid] = {
                "kind": spec.kind.value,
                "criticality": spec.criticality,
                "freshness_target": spec.freshness_target,
                "tags": list(spec.tags),
                "health": p.health.value,
                "failing_cause": p.failing_cause,
                "failing_stage": p.failing_stage,
                "recovering": p.recover_at is not None,
                "suppressed": p.suppress_until is not None,
                "ticks_since_alloc_change": t - self._alloc_changed_at.get(pid, 0),
                "stages": stages,
                "drift": drift,
                "delay": delay_by_pipeline.get(pid),
            }
            series[pid] = {
                "utilization": self._series_window(pid, "utilization", UTILIZATION_WINDOW),
                "ingress": self._series_window(pid, "ingress", INGRESS_WINDOW),
            }

        window = self.policy.cost.window
        committed, horizon = self._spend_projection(world, t)
        policy_view = {
            "max_scale_step": self.policy.cost.max_scale_step,
            "budget_per_window": self.policy.cost.budget_per_window,
            "window": window,
            "window_remaining": horizon,
            "windowed_spend": self._window_spend,
            "committed_spend": committed,
            "unit_price": self.resource_model.unit_price,
            "quarantine_allowed": self.policy.schema.quarantine_allowed,
            "schema_mode": self.policy.schema.mode,
            "breach_tolerance": self.policy.freshness.breach_tolerance,
            "allowed_strategies": [k.value for k in self.policy.recovery.allowed_strategies],
        }

        return {
            "tick": t,
            "snapshot": snapshot,
            "incidents": tuple(incidents),
            "pipelines": pipelines,
            "series": series,
            "policy": policy_view,
            "memory": self.memory.extract(),
            "faults": tuple(event.to_dict() for event in applied_faults),
        }

    def _build_bundle(self, t: int, actor: Actor, parts: dict) -> ObservationBundle:
        policy_view = dict(parts["policy"])
        policy_view["allowed_kinds"] = [
            k.value for k in self.policy.actions.allowed_for(actor)
        ]
        return ObservationBundle(
            tick=t,
            agent=actor.value,
            snapshot=parts["snapshot"],
            open_incidents=parts["incidents"],
            pipelines=parts["pipelines"],
            series=parts["series"],
            policy=policy_view,
            memory=parts["memory"],
            faults=parts["faults"],
        )
