"""Pluggable reasoning backends.

A backend is anything with a ``decide(bundle) -> list[CandidateAction]``
method that is a pure function of the bundle. The builtin backend runs
the deterministic heuristics in this package; the stub backend replays
scripted responses from a JSON file so tests can stand in for an
external reasoning service. ``make_backend`` resolves the CLI selector
(``builtin`` or ``stub:<path>``).
"""

from __future__ import annotations

import json
from typing import Protocol

from ..core.actions import Actor
from .bundle import CandidateAction, ObservationBundle
from .optimization import optimize_propose
from .recovery import recovery_candidates
from .schema_agent import schema_candidates


class BackendError(ValueError):
    """A backend response that cannot be interpreted as candidates."""


class ReasoningBackend(Protocol):
    name: str

    def decide(self, bundle: ObservationBundle) -> list[CandidateAction]: ...


class BuiltinBackend:
    """Deterministic rule-based reasoning, dispatched per agent."""

    name = "builtin"

    def decide(self, bundle: ObservationBundle) -> list[CandidateAction]:
        if bundle.agent == Actor.OPTIMIZATION_AGENT.value:
            return optimize_propose(bundle)
        if bundle.agent == Actor.SCHEMA_AGENT.value:
            return schema_candidates(bundle)
        if bundle.agent == Actor.RECOVERY_AGENT.value:
            return recovery_candidates(bundle)
        return []


class NullBackend:
    """Backend that never proposes anything.

    Running the agentic controller with this backend exercises every
    chassis code path while leaving the simulated world exactly as the
    static controller would, which is what the baseline-equivalence
    check relies on.
    """

    name = "null"

    def decide(self, bundle: ObservationBundle) -> list[CandidateAction]:
        return []


class StubBackend:
    """Scripted responses keyed by ``"<tick>:<agent>"``.

    The file maps keys to lists of candidate-action dicts. A missing key
    means "no candidates". Malformed entries raise BackendError; the
    control loop records the violation and falls back to the builtin
    rules for that call.
    """

    name = "stub"

    def __init__(self, path: str) -> None:
        self.path = path
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise BackendError(f"stub file {path} must contain a JSON object")
        self._responses: dict[str, object] = raw

    def decide(self, bundle: ObservationBundle) -> list[CandidateAction]:
        key = f"{bundle.tick}:{bundle.agent}"
        entries = self._responses.get(key)
        if entries is None:
            return []
        if not isinstance(entries, list):
            raise BackendError(f"stub entry {key!r} must be a list of candidate actions")
        try:
            return [CandidateAction.from_dict(entry) for entry in entries]
        except ValueError as exc:
            raise BackendError(f"stub entry {key!r}: {exc}") from exc


def make_backend(selector: str) -> ReasoningBackend:
    if selector == "builtin":
        return BuiltinBackend()
    if selector == "null":
        return NullBackend()
    if selector.startswith("stub:"):
        path = selector[len("stub:"):]
        if not path:
            raise BackendError("stub backend needs a file path: stub:<path>")
        return StubBackend(path)
    raise BackendError(f"unknown backend selector {selector!r}")
