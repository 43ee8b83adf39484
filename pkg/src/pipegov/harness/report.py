"""Deterministic experiment artifacts: JSON reports, CSV tables, audit logs.

Every writer here produces byte-identical output for identical inputs —
no timestamps, no environment data, sorted keys, fixed float repr — so
reruns can be diffed and the determinism acceptance check can compare
files directly. Writers require the output directory to exist; the CLI
creates it before delegating.
"""

from __future__ import annotations

import csv
import io
import json
import os

from .metrics import AggregateComparison, ComparisonReport, MetricsReport
from .runner import RunResult


class IoFailure(Exception):
    """An artifact could not be written."""


def _write_text(path: str, text: str) -> str:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def _require_dir(out_dir: str) -> None:
    if not os.path.isdir(out_dir):
        raise IoFailure(f"output directory {out_dir!r} does not exist")


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _csv_text(header: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def _metric_rows(report: MetricsReport) -> list[list]:
    rows: list[list] = []
    if report.mttr_mean is not None:
        rows.append([report.controller, "mttr_mean", report.mttr_mean])
    rows.append([report.controller, "total_cost", report.total_cost])
    rows.append([report.controller, "manual_interventions", report.manual_interventions])
    for pid in sorted(report.freshness_p95):
        rows.append([report.controller, f"freshness_p95.{pid}", report.freshness_p95[pid]])
    rows.append([report.controller, "incidents_closed", len(report.mttr_per_incident)])
    rows.append([report.controller, "incidents_unresolved", len(report.unresolved_incidents)])
    return rows


def emit_report(comparison: ComparisonReport, out_dir: str) -> list[str]:
    """Write comparison.json, metrics.csv, and plot-ready bar CSVs."""

    _require_dir(out_dir)
    written: list[str] = []

    written.append(
        _write_text(
            os.path.join(out_dir, "comparison.json"), _json_text(comparison.to_dict())
        )
    )

    rows = _metric_rows(comparison.baseline) + _metric_rows(comparison.agentic)
    written.append(
        _write_text(
            os.path.join(out_dir, "metrics.csv"),
            _csv_text(["controller", "metric", "value"], rows),
        )
    )

    mttr_rows = [
        [report.controller, "" if report.mttr_mean is None else report.mttr_mean]
        for report in (comparison.baseline, comparison.agentic)
    ]
    written.append(
        _write_text(
            os.path.join(out_dir, "mttr_bars.csv"),
            _csv_text(["controller", "mttr_mean"], mttr_rows),
        )
    )

    cost_rows = [
        [report.controller, report.total_cost]
        for report in (comparison.baseline, comparison.agentic)
    ]
    written.append(
        _write_text(
            os.path.join(out_dir, "cost_bars.csv"),
            _csv_text(["controller", "total_cost"], cost_rows),
        )
    )
    return written


def emit_aggregate_report(aggregate: AggregateComparison, out_dir: str) -> list[str]:
    """Write the multi-seed summary (mean ± stddev deltas plus per-seed detail)."""

    _require_dir(out_dir)
    return [
        _write_text(
            os.path.join(out_dir, "comparison.json"), _json_text(aggregate.to_dict())
        )
    ]


def write_run_artifacts(result: RunResult, out_dir: str) -> list[str]:
    """Persist one run: audit.jsonl, run.json summary, telemetry.csv."""

    _require_dir(out_dir)
    written: list[str] = []

    audit_path = os.path.join(out_dir, "audit.jsonl")
    try:
        result.audit.write_jsonl(audit_path)
    except OSError as exc:
        raise IoFailure(f"cannot write {audit_path}: {exc}") from exc
    written.append(audit_path)

    summary = {
        "controller": result.controller,
        "scenario_hash": result.scenario_hash,
        "seed": result.seed,
        "policy_version": result.policy_version,
        "horizon": result.horizon,
        "allocations": result.allocations,
        "interventions": result.interventions,
        "anomaly_flags": result.anomaly_flags,
        "total_cost": result.total_cost,
        "counters": result.counters,
        "incidents": [inc.to_dict() for inc in result.incidents],
        "memory": result.memory.extract(),
    }
    written.append(_write_text(os.path.join(out_dir, "run.json"), _json_text(summary)))

    rows: list[list] = []
    for scope, name in result.store.series_keys():
        for tick, value in result.store.series(scope, name):
            rows.append([scope, name, tick, value])
    written.append(
        _write_text(
            os.path.join(out_dir, "telemetry.csv"),
            _csv_text(["scope", "metric", "tick", "value"], rows),
        )
    )
    return written
