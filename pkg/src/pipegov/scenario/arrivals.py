"""Deterministic per-tick workload generation.

Each tick gets its own generator seeded from SHA-256(seed:tick), so an
arrival count depends only on (scenario seed, tick) — never on how many
draws happened earlier in the run. That makes traces reproducible and
lets tests probe any single tick in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

from pipegov.scenario.model import ScenarioSpec


def tick_rng(seed: int, tick: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{tick}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def generate_arrivals(spec: ScenarioSpec, tick: int) -> dict[str, int]:
    """Record counts arriving at each pipeline on this tick.

    Streaming pipelines draw from a Poisson whose mean is the base rate
    scaled by any active burst; draws happen in sorted pipeline order from
    the tick's own generator. Batch pipelines receive their dataset at
    every schedule boundary (tick > 0) and nothing in between.
    """

    out: dict[str, int] = {}
    rng: np.random.Generator | None = None
    for pid in sorted(spec.arrival_models):
        if rng is None:
            rng = tick_rng(spec.seed, tick)
        mean = spec.arrival_models[pid].mean_at(tick)
        out[pid] = int(rng.poisson(mean))
    for pid in sorted(spec.batch_models):
        model = spec.batch_models[pid]
        on_boundary = tick > 0 and tick % model.schedule_period == 0
        out[pid] = model.dataset_size if on_boundary else 0
    return out
