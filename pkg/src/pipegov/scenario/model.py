"""Workload and fault-schedule description for one simulated run.

A scenario is a single JSON document: pipeline fleet, shared resource
model, arrival/batch workload models, a scripted fault schedule, and the
simulator latency constants. Parsing is strict — unknown keys are
rejected at every level so a typo cannot silently change an experiment —
and ``scenario_hash`` fingerprints the parsed document so two runs can
prove they executed the same world.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

from pipegov.core.pipeline import (
    PipelineKind,
    PipelineSpec,
    ResourceModel,
    ValidationIssue,
    validate_pipeline_spec,
)
from pipegov.core.schema import SchemaDelta
from pipegov.simkernel.world import SimConstants
from pipegov.telemetry.audit import canonical_json


class ScenarioError(ValueError):
    """Structural problem in a scenario document."""


class FaultKind(str, Enum):
    SCHEMA_DRIFT = "SchemaDrift"
    UPSTREAM_DELAY = "UpstreamDelay"
    RESOURCE_CONTENTION = "ResourceContention"
    TRANSIENT_TASK_FAILURE = "TransientTaskFailure"


_FAULT_FIELDS: dict[FaultKind, set[str]] = {
    FaultKind.SCHEMA_DRIFT: {"pipeline", "delta", "partition"},
    FaultKind.UPSTREAM_DELAY: {"pipeline", "delay_ticks", "missing_fraction"},
    FaultKind.RESOURCE_CONTENTION: {"capacity_reduction", "duration_ticks"},
    FaultKind.TRANSIENT_TASK_FAILURE: {"pipeline", "stage"},
}


@dataclass(frozen=True)
class FaultEvent:
    """One scripted fault. Only the fields of its kind are set."""

    tick: int
    kind: FaultKind
    pipeline: str | None = None
    delta: SchemaDelta | None = None
    partition: str | None = None
    delay_ticks: int | None = None
    missing_fraction: float | None = None
    capacity_reduction: int | None = None
    duration_ticks: int | None = None
    stage: str | None = None

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ScenarioError(f"fault tick must be >= 0, got {self.tick}")
        if self.kind is FaultKind.SCHEMA_DRIFT:
            if not self.pipeline or self.delta is None or not self.partition:
                raise ScenarioError("SchemaDrift needs pipeline, delta and partition")
        elif self.kind is FaultKind.UPSTREAM_DELAY:
            if not self.pipeline or self.delay_ticks is None or self.missing_fraction is None:
                raise ScenarioError("UpstreamDelay needs pipeline, delay_ticks and missing_fraction")
            if self.delay_ticks < 1:
                raise ScenarioError(f"delay_ticks must be >= 1, got {self.delay_ticks}")
            if not 0.0 <= self.missing_fraction <= 1.0:
                raise ScenarioError(f"missing_fraction must be in [0, 1], got {self.missing_fraction}")
        elif self.kind is FaultKind.RESOURCE_CONTENTION:
            if self.capacity_reduction is None or self.duration_ticks is None:
                raise ScenarioError("ResourceContention needs capacity_reduction and duration_ticks")
            if self.capacity_reduction < 1:
                raise ScenarioError(f"capacity_reduction must be >= 1, got {self.capacity_reduction}")
            if self.duration_ticks < 1:
                raise ScenarioError(f"duration_ticks must be >= 1, got {self.duration_ticks}")
        elif self.kind is FaultKind.TRANSIENT_TASK_FAILURE:
            if not self.pipeline or not self.stage:
                raise ScenarioError("TransientTaskFailure needs pipeline and stage")

    def to_dict(self) -> dict:
        out: dict = {"tick": self.tick, "kind": self.kind.value}
        for name in sorted(_FAULT_FIELDS[self.kind]):
            value = getattr(self, name)
            out[name] = value.to_dict() if name == "delta" else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> FaultEvent:
        if "kind" not in data or "tick" not in data:
            raise ScenarioError("fault event needs 'tick' and 'kind'")
        try:
            kind = FaultKind(data["kind"])
        except ValueError as exc:
            raise ScenarioError(f"unknown fault kind {data['kind']!r}") from exc
        allowed = _FAULT_FIELDS[kind] | {"tick", "kind"}
        unknown = set(data) - allowed
        if unknown:
            raise ScenarioError(f"{kind.value} fault: unknown keys {sorted(unknown)}")
        kwargs: dict = {"tick": int(data["tick"]), "kind": kind}
        for name in _FAULT_FIELDS[kind]:
            if name not in data:
                raise ScenarioError(f"{kind.value} fault: missing {name!r}")
            value = data[name]
            if name == "delta":
                value = SchemaDelta.from_dict(value)
            elif name in ("delay_ticks", "capacity_reduction", "duration_ticks"):
                value = int(value)
            elif name == "missing_fraction":
                value = float(value)
            kwargs[name] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class ArrivalModel:
    """Streaming ingress: Poisson mean base_rate, times any active burst."""

    base_rate: float
    bursts: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self) -> None:
        if self.base_rate <= 0:
            raise ScenarioError(f"arrival base_rate must be > 0, got {self.base_rate}")
        for start, end, mult in self.bursts:
            if start >= end:
                raise ScenarioError(f"burst window [{start}, {end}) is empty")
            if mult <= 0:
                raise ScenarioError(f"burst multiplier must be > 0, got {mult}")

    def mean_at(self, tick: int) -> float:
        mean = self.base_rate
        for start, end, mult in self.bursts:
            if start <= tick < end:
                mean *= mult
        return mean

    def to_dict(self) -> dict:
        return {
            "base_rate": self.base_rate,
            "bursts": [[s, e, m] for s, e, m in self.bursts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ArrivalModel:
        unknown = set(data) - {"base_rate", "bursts"}
        if unknown:
            raise ScenarioError(f"arrival model: unknown keys {sorted(unknown)}")
        if "base_rate" not in data:
            raise ScenarioError("arrival model: missing 'base_rate'")
        bursts = []
        for entry in data.get("bursts", ()):
            if len(entry) != 3:
                raise ScenarioError(f"burst must be [start, end, multiplier], got {entry!r}")
            bursts.append((int(entry[0]), int(entry[1]), float(entry[2])))
        return cls(base_rate=float(data["base_rate"]), bursts=tuple(bursts))


@dataclass(frozen=True)
class BatchModel:
    """Batch ingress: dataset_size records land at every schedule boundary."""

    dataset_size: int
    schedule_period: int

    def __post_init__(self) -> None:
        if self.dataset_size < 1:
            raise ScenarioError(f"dataset_size must be >= 1, got {self.dataset_size}")
        if self.schedule_period < 1:
            raise ScenarioError(f"schedule_period must be >= 1, got {self.schedule_period}")

    def to_dict(self) -> dict:
        return {"dataset_size": self.dataset_size, "schedule_period": self.schedule_period}

    @classmethod
    def from_dict(cls, data: dict) -> BatchModel:
        unknown = set(data) - {"dataset_size", "schedule_period"}
        if unknown:
            raise ScenarioError(f"batch model: unknown keys {sorted(unknown)}")
        for key in ("dataset_size", "schedule_period"):
            if key not in data:
                raise ScenarioError(f"batch model: missing {key!r}")
        return cls(dataset_size=int(data["dataset_size"]), schedule_period=int(data["schedule_period"]))


_TOP_KEYS = {
    "horizon",
    "seed",
    "resource_model",
    "pipelines",
    "arrival_models",
    "batch_models",
    "fault_schedule",
    "sim_constants",
}


@dataclass(frozen=True)
class ScenarioSpec:
    horizon: int
    seed: int
    resource_model: ResourceModel
    pipelines: tuple[PipelineSpec, ...]
    arrival_models: dict[str, ArrivalModel] = field(default_factory=dict)
    batch_models: dict[str, BatchModel] = field(default_factory=dict)
    fault_schedule: tuple[FaultEvent, ...] = ()
    sim_constants: SimConstants = field(default_factory=SimConstants)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ScenarioError(f"horizon must be >= 1, got {self.horizon}")

    def pipeline_map(self) -> dict[str, PipelineSpec]:
        return {p.id: p for p in self.pipelines}

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "seed": self.seed,
            "resource_model": self.resource_model.to_dict(),
            "pipelines": [p.to_dict() for p in self.pipelines],
            "arrival_models": {k: v.to_dict() for k, v in sorted(self.arrival_models.items())},
            "batch_models": {k: v.to_dict() for k, v in sorted(self.batch_models.items())},
            "fault_schedule": [f.to_dict() for f in self.fault_schedule],
            "sim_constants": self.sim_constants.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioSpec:
        if not isinstance(data, dict):
            raise ScenarioError("scenario document must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ScenarioError(f"scenario: unknown keys {sorted(unknown)}")
        for key in ("horizon", "seed", "resource_model", "pipelines"):
            if key not in data:
                raise ScenarioError(f"scenario: missing {key!r}")
        try:
            pipelines = tuple(PipelineSpec.from_dict(p) for p in data["pipelines"])
            resource_model = ResourceModel.from_dict(data["resource_model"])
        except (ValueError, KeyError) as exc:
            raise ScenarioError(str(exc)) from exc
        try:
            constants = SimConstants.from_dict(data.get("sim_constants", {}))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        return cls(
            horizon=int(data["horizon"]),
            seed=int(data["seed"]),
            resource_model=resource_model,
            pipelines=pipelines,
            arrival_models={
                k: ArrivalModel.from_dict(v) for k, v in data.get("arrival_models", {}).items()
            },
            batch_models={
                k: BatchModel.from_dict(v) for k, v in data.get("batch_models", {}).items()
            },
            fault_schedule=tuple(FaultEvent.from_dict(f) for f in data.get("fault_schedule", ())),
            sim_constants=constants,
        )


def parse_scenario(source: dict | str) -> ScenarioSpec:
    """Parse a scenario from a dict or a JSON string; strict on structure."""

    if isinstance(source, str):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
    else:
        data = source
    return ScenarioSpec.from_dict(data)


def validate_scenario(spec: ScenarioSpec) -> list[ValidationIssue]:
    """Semantic cross-checks on a structurally valid scenario."""

    issues: list[ValidationIssue] = []
    seen: set[str] = set()
    for p in spec.pipelines:
        if p.id in seen:
            issues.append(ValidationIssue("duplicate_pipeline", p.id, f"pipeline id {p.id!r} repeats"))
        seen.add(p.id)
        issues.extend(validate_pipeline_spec(p))

    by_id = spec.pipeline_map()
    for pid, p in sorted(by_id.items()):
        if p.kind is PipelineKind.STREAMING and pid not in spec.arrival_models:
            issues.append(
                ValidationIssue("missing_arrival_model", pid, f"streaming pipeline {pid!r} has no arrival model")
            )
        if p.kind is PipelineKind.BATCH:
            model = spec.batch_models.get(pid)
            if model is None:
                issues.append(
                    ValidationIssue("missing_batch_model", pid, f"batch pipeline {pid!r} has no batch model")
                )
            elif p.schedule_period is not None and model.schedule_period != p.schedule_period:
                issues.append(
                    ValidationIssue(
                        "model_period_mismatch",
                        pid,
                        f"batch model period {model.schedule_period} != pipeline schedule_period {p.schedule_period}",
                    )
                )
    for pid in sorted(set(spec.arrival_models) | set(spec.batch_models)):
        if pid not in by_id:
            issues.append(ValidationIssue("orphan_model", pid, f"workload model names unknown pipeline {pid!r}"))
        elif pid in spec.arrival_models and by_id[pid].kind is not PipelineKind.STREAMING:
            issues.append(ValidationIssue("orphan_model", pid, f"arrival model on non-streaming pipeline {pid!r}"))
        elif pid in spec.batch_models and by_id[pid].kind is not PipelineKind.BATCH:
            issues.append(ValidationIssue("orphan_model", pid, f"batch model on non-batch pipeline {pid!r}"))

    for i, event in enumerate(spec.fault_schedule):
        subject = f"fault[{i}]"
        if not 0 <= event.tick < spec.horizon:
            issues.append(
                ValidationIssue("fault_tick_range", subject, f"tick {event.tick} outside [0, {spec.horizon})")
            )
        if event.pipeline is not None and event.pipeline not in by_id:
            issues.append(
                ValidationIssue("fault_unknown_pipeline", subject, f"fault names unknown pipeline {event.pipeline!r}")
            )
        elif event.kind is FaultKind.TRANSIENT_TASK_FAILURE:
            stages = {s.id for s in by_id[event.pipeline].stages}
            if event.stage not in stages:
                issues.append(
                    ValidationIssue(
                        "fault_unknown_stage",
                        subject,
                        f"fault names unknown stage {event.stage!r} on pipeline {event.pipeline!r}",
                    )
                )
    return issues


def scenario_hash(spec: ScenarioSpec) -> str:
    """Stable fingerprint of the full scenario document."""

    return hashlib.sha256(canonical_json(spec.to_dict()).encode("utf-8")).hexdigest()
