"""What an agent is allowed to see, and what the system remembers.

An ObservationBundle is a frozen, JSON-serializable view assembled by the
control loop for exactly one (tick, agent) reasoning call. Everything a
reasoning backend may use lives here — telemetry, open incidents, policy
headroom, past-outcome statistics — so backends can be pure functions of
the bundle and stay deterministic and replaceable.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class MemoryCell:
    attempts: int = 0
    successes: int = 0
    total_resolution_ticks: int = 0

    def success_rate(self) -> float:
        return self.successes / self.attempts if self.attempts else 0.0

    def mean_resolution(self) -> float:
        return self.total_resolution_ticks / self.successes if self.successes else 0.0


class OutcomeMemory:
    """Action-effectiveness statistics keyed by (incident class, action kind).

    Attempts count every executed action tied to an incident; successes
    count incidents that closed with that action as their resolution.
    """

    def __init__(self) -> None:
        self._cells: dict[tuple[str, str], MemoryCell] = {}

    def _cell(self, incident_class: str, kind: str) -> MemoryCell:
        return self._cells.setdefault((incident_class, kind), MemoryCell())

    def record_attempt(self, incident_class: str, kind: str) -> None:
        self._cell(incident_class, kind).attempts += 1

    def record_success(self, incident_class: str, kind: str, resolution_ticks: int) -> None:
        cell = self._cell(incident_class, kind)
        cell.successes += 1
        cell.total_resolution_ticks += resolution_ticks
        if cell.successes > cell.attempts:
            raise ValueError(
                f"memory for ({incident_class}, {kind}): successes {cell.successes} "
                f"exceed attempts {cell.attempts}"
            )

    def stats(self, incident_class: str, kind: str) -> MemoryCell:
        return self._cells.get((incident_class, kind), MemoryCell())

    def extract(self) -> dict[str, dict]:
        """Plain-data form for embedding into ObservationBundles."""

        out: dict[str, dict] = {}
        for (cls, kind), cell in sorted(self._cells.items()):
            out[f"{cls}:{kind}"] = {
                "attempts": cell.attempts,
                "successes": cell.successes,
                "success_rate": cell.success_rate(),
                "mean_resolution": cell.mean_resolution(),
            }
        return out


@dataclass(frozen=True)
class ObservationBundle:
    """Read-only, plain-data view for one reasoning call.

    ``pipelines`` carries per-pipeline operational context::

        {kind, criticality, freshness_target, tags, health, recovering,
         suppressed, ticks_since_alloc_change,
         stages: {stage_id: {alloc, min_alloc, max_alloc, base_rate}},
         drift: None | {partition, window_end, quarantine_mode, compatible,
                        delta},
         delay: None | {baseline_ingress}}

    ``series`` carries short per-pipeline metric windows (newest last)::

        {pipeline_id: {"utilization": [...], "ingress": [...]}}
    """

    tick: int
    agent: str
    snapshot: dict
    open_incidents: tuple[dict, ...]
    pipelines: dict[str, dict]
    series: dict[str, dict[str, list]]
    policy: dict
    memory: dict[str, dict]
    faults: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "agent": self.agent,
            "snapshot": self.snapshot,
            "open_incidents": list(self.open_incidents),
            "pipelines": self.pipelines,
            "series": self.series,
            "policy": self.policy,
            "memory": self.memory,
            "faults": list(self.faults),
        }


_CANDIDATE_KEYS = {
    "kind",
    "pipeline",
    "stage",
    "partition",
    "delta_units",
    "condition",
    "rationale",
    "incident_id",
}


@dataclass(frozen=True, slots=True)
class CandidateAction:
    """What a reasoning backend emits: a plain, data-only action request.

    Candidates carry no authority. The control loop screens each one
    against the proposing agent's action table and the governance policy
    before anything touches the cluster.
    """

    kind: str
    pipeline: str
    stage: str | None = None
    partition: str | None = None
    delta_units: int = 0
    condition: str | None = None
    rationale: str = ""
    incident_id: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "pipeline": self.pipeline}
        if self.stage is not None:
            out["stage"] = self.stage
        if self.partition is not None:
            out["partition"] = self.partition
        if self.delta_units:
            out["delta_units"] = self.delta_units
        if self.condition is not None:
            out["condition"] = self.condition
        if self.rationale:
            out["rationale"] = self.rationale
        if self.incident_id is not None:
            out["incident_id"] = self.incident_id
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "CandidateAction":
        if not isinstance(raw, dict):
            raise ValueError(f"candidate action must be a mapping, got {type(raw).__name__}")
        unknown = set(raw) - _CANDIDATE_KEYS
        if unknown:
            raise ValueError(f"unknown candidate action keys: {sorted(unknown)}")
        for key in ("kind", "pipeline"):
            if key not in raw:
                raise ValueError(f"candidate action missing required key {key!r}")
            if not isinstance(raw[key], str):
                raise ValueError(f"candidate action key {key!r} must be a string")
        delta = raw.get("delta_units", 0)
        if not isinstance(delta, int) or isinstance(delta, bool):
            raise ValueError("candidate action delta_units must be an integer")
        for key in ("stage", "partition", "condition", "incident_id"):
            if raw.get(key) is not None and not isinstance(raw[key], str):
                raise ValueError(f"candidate action key {key!r} must be a string or null")
        rationale = raw.get("rationale", "")
        if not isinstance(rationale, str):
            raise ValueError("candidate action rationale must be a string")
        return cls(
            kind=raw["kind"],
            pipeline=raw["pipeline"],
            stage=raw.get("stage"),
            partition=raw.get("partition"),
            delta_units=delta,
            condition=raw.get("condition"),
            rationale=rationale,
            incident_id=raw.get("incident_id"),
        )
