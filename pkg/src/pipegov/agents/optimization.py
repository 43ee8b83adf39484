"""Allocation tuning: scale idle pipelines down, breaching pipelines up.

Pure decision logic over an ObservationBundle. Three rules, applied in
a fixed order so output is deterministic:

1. Contention relief — when the cluster is over-committed, shed units
   from the least-critical busy pipelines before anything else.
2. Sustained-idle scale-down — a pipeline whose utilization stayed under
   ``LOW_UTIL_THRESHOLD`` for ``LOW_UTIL_TICKS`` consecutive ticks (and
   whose allocation has not changed in that long) gives a step back.
3. Freshness scale-up — a healthy streaming pipeline lagging past its
   freshness target gets a step, most critical first, but only while the
   projected window spend stays inside budget.

The control loop still screens every candidate against policy; the
budget check here just avoids proposing obvious denials.
"""

from __future__ import annotations

from .bundle import CandidateAction, ObservationBundle

LOW_UTIL_THRESHOLD = 0.30
LOW_UTIL_TICKS = 30

_HEALTHY = "Healthy"


def _can_scale_down(stages: dict[str, dict]) -> bool:
    return any(s["alloc"] > s["min_alloc"] for s in stages.values())


def _can_scale_up(stages: dict[str, dict]) -> bool:
    return any(s["alloc"] < s["max_alloc"] for s in stages.values())


def _budget_allows(policy: dict, pending_units: int, extra_units: int) -> bool:
    budget = policy.get("budget_per_window")
    if budget is None:
        return True
    projected = (
        policy["committed_spend"]
        + (pending_units + extra_units) * policy["unit_price"] * policy["window_remaining"]
    )
    return projected <= budget


def _sustained_low(bundle: ObservationBundle, pid: str) -> bool:
    meta = bundle.pipelines[pid]
    if meta["ticks_since_alloc_change"] < LOW_UTIL_TICKS:
        return False
    window = bundle.series.get(pid, {}).get("utilization", [])
    if len(window) < LOW_UTIL_TICKS:
        return False
    return all(u < LOW_UTIL_THRESHOLD for u in window[-LOW_UTIL_TICKS:])


def optimize_propose(bundle: ObservationBundle) -> list[CandidateAction]:
    policy = bundle.policy
    step = policy["max_scale_step"]
    snapshot_pipelines = bundle.snapshot.get("pipelines", {})
    contended = bundle.snapshot.get("capacity_headroom", 0) < 0

    candidates: list[CandidateAction] = []
    pending_units = 0

    if contended:
        # Shed load: least-critical busy pipelines first (ties by id).
        busy = []
        for pid in sorted(bundle.pipelines):
            meta = bundle.pipelines[pid]
            sample = snapshot_pipelines.get(pid, {})
            if sample.get("queue_depth", 0) <= 0:
                continue
            if not _can_scale_down(meta["stages"]):
                continue
            busy.append((-meta["criticality"], pid))
        for _, pid in sorted(busy):
            candidates.append(
                CandidateAction(
                    kind="ScaleDown",
                    pipeline=pid,
                    delta_units=step,
                    rationale="cluster over capacity; shedding least-critical load",
                )
            )

    for pid in sorted(bundle.pipelines):
        meta = bundle.pipelines[pid]
        if meta["health"] != _HEALTHY or meta["recovering"]:
            continue
        if contended and any(c.pipeline == pid for c in candidates):
            continue
        if _can_scale_down(meta["stages"]) and _sustained_low(bundle, pid):
            candidates.append(
                CandidateAction(
                    kind="ScaleDown",
                    pipeline=pid,
                    delta_units=step,
                    rationale=(
                        f"utilization below {LOW_UTIL_THRESHOLD:.0%} for "
                        f"{LOW_UTIL_TICKS} consecutive ticks"
                    ),
                )
            )

    # Freshness relief: most critical breaching pipeline first.
    breaching = []
    for pid in sorted(bundle.pipelines):
        meta = bundle.pipelines[pid]
        target = meta.get("freshness_target")
        if target is None:
            continue
        if meta["health"] != _HEALTHY or meta["recovering"] or meta["suppressed"]:
            continue
        sample = snapshot_pipelines.get(pid, {})
        if sample.get("freshness_lag", 0) <= target:
            continue
        if not _can_scale_up(meta["stages"]):
            continue
        breaching.append((meta["criticality"], pid))
    for _, pid in sorted(breaching):
        meta = bundle.pipelines[pid]
        extra = step * len(meta["stages"])
        if not _budget_allows(policy, pending_units, extra):
            continue
        pending_units += extra
        candidates.append(
            CandidateAction(
                kind="ScaleUp",
                pipeline=pid,
                delta_units=step,
                rationale="freshness lag above target; adding capacity",
            )
        )

    return candidates
