"""Metric series, incident lifecycle, and the hash-chained audit log."""

from __future__ import annotations

import json

import pytest

from pipegov.core import Actor
from pipegov.telemetry import (
    AlreadyClosed,
    AuditError,
    AuditLog,
    GENESIS_PREV_HASH,
    IncidentClass,
    IncidentRegistry,
    MetricStore,
    NonMonotonicTick,
    UnknownIncident,
    UnknownSeries,
    load_audit_jsonl,
    verify_chain,
)

import oracles


class TestMetricStore:
    def test_append_and_read_back(self):
        store = MetricStore()
        store.record_sample("p", "queue_depth", 5, 0.8)
        assert store.series("p", "queue_depth") == [(5, 0.8)]

    def test_non_monotonic_tick_rejected(self):
        store = MetricStore()
        store.record_sample("p", "queue_depth", 5, 1.0)
        with pytest.raises(NonMonotonicTick):
            store.record_sample("p", "queue_depth", 5, 2.0)
        with pytest.raises(NonMonotonicTick):
            store.record_sample("p", "queue_depth", 4, 2.0)

    def test_long_series_preserved_in_order(self):
        store = MetricStore()
        for t in range(100):
            store.record_sample("p", "ingress", t, float(t))
        series = store.series("p", "ingress")
        assert len(series) == 100
        assert series == sorted(series)

    def test_query_window_takes_tail(self):
        store = MetricStore()
        for t in range(1, 11):
            store.record_sample("p", "ingress", t, float(t))
        window = store.query_window("p", "ingress", 3)
        assert [t for t, _ in window] == [8, 9, 10]

    def test_query_window_larger_than_history(self):
        store = MetricStore()
        for t in range(1, 4):
            store.record_sample("p", "ingress", t, float(t))
        assert len(store.query_window("p", "ingress", 999)) == 3

    def test_query_window_respects_gaps(self):
        store = MetricStore()
        for t in (1, 5, 9, 10):
            store.record_sample("p", "ingress", t, float(t))
        window = store.query_window("p", "ingress", 5)
        assert [t for t, _ in window] == [9, 10]  # ticks in (5, 10]

    def test_unknown_series_raises(self):
        store = MetricStore()
        with pytest.raises(UnknownSeries):
            store.query_window("ghost", "ingress", 3)
        with pytest.raises(UnknownSeries):
            store.series("ghost", "ingress")

    def test_csv_export_shape(self):
        store = MetricStore()
        store.record_sample("p", "cost", 1, 2.0)
        store.record_sample("p", "cost", 2, 2.5)
        assert store.to_csv("p", "cost") == "tick,value\n1,2\n2,2.5\n"


class TestIncidents:
    def test_duration_is_close_minus_open(self):
        reg = IncidentRegistry()
        inc = reg.open_incident("p", IncidentClass.TRANSIENT_TASK_FAILURE, 200)
        closed = reg.close_incident(inc.id, 260, resolution="Replay")
        assert closed.duration() == 60

    def test_duplicate_open_coalesces(self):
        reg = IncidentRegistry()
        first = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 10)
        second = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 15)
        assert first.id == second.id
        assert second.detected_tick == 10

    def test_same_class_reopens_after_close(self):
        reg = IncidentRegistry()
        first = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 10)
        reg.close_incident(first.id, 20, "Resume")
        second = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 30)
        assert second.id != first.id

    def test_close_before_open_rejected(self):
        reg = IncidentRegistry()
        inc = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 10)
        with pytest.raises(ValueError):
            reg.close_incident(inc.id, 9, "Resume")

    def test_close_twice_rejected(self):
        reg = IncidentRegistry()
        inc = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 10)
        reg.close_incident(inc.id, 12, "Resume")
        with pytest.raises(AlreadyClosed):
            reg.close_incident(inc.id, 13, "Resume")

    def test_unknown_incident_rejected(self):
        reg = IncidentRegistry()
        with pytest.raises(UnknownIncident):
            reg.close_incident("INC-999", 5, "Resume")

    def test_open_incidents_are_filtered(self):
        reg = IncidentRegistry()
        a = reg.open_incident("p", IncidentClass.UPSTREAM_DELAY, 10)
        b = reg.open_incident("q", IncidentClass.FRESHNESS_BREACH, 11)
        reg.close_incident(a.id, 20, "Resume")
        open_ids = {i.id for i in reg.open_incidents()}
        assert open_ids == {b.id}

    def test_serialization_keys(self):
        reg = IncidentRegistry()
        inc = reg.open_incident("p", IncidentClass.SCHEMA_INCOMPATIBLE, 10)
        d = inc.to_dict()
        assert d["incident_class"] == "SchemaIncompatible"
        assert d["pipeline"] == "p"
        assert d["detected_tick"] == 10
        assert d["resumed_tick"] is None


def _payload(i: int) -> dict:
    return {"kind": "outcome", "event": "anomaly_flag", "index": i}


def _filled_log(n: int) -> AuditLog:
    log = AuditLog()
    for i in range(n):
        log.append(tick=i, actor=Actor.POLICY_ENGINE, payload=_payload(i), policy_version=1)
    return log


class TestAuditLog:
    def test_genesis_record(self):
        log = _filled_log(1)
        assert log.records[0].seq == 1
        assert log.records[0].prev_hash == GENESIS_PREV_HASH

    def test_unknown_payload_kind_rejected(self):
        log = AuditLog()
        with pytest.raises(AuditError):
            log.append(tick=0, actor=Actor.OPERATOR, payload={"kind": "gossip"}, policy_version=1)

    def test_thousand_appends_verify(self):
        log = _filled_log(1000)
        assert verify_chain(log.records) is None
        # independent walk over the serialized form
        rows = [json.loads(line) for line in log.to_jsonl().splitlines()]
        assert oracles.oracle_first_bad_seq(rows) is None

    def test_implementation_hash_matches_reference(self):
        log = _filled_log(3)
        for line in log.to_jsonl().splitlines():
            row = json.loads(line)
            assert row["hash"] == oracles.oracle_record_hash(row)

    def test_value_tamper_detected_at_that_seq(self):
        log = _filled_log(20)
        rows = [json.loads(line) for line in log.to_jsonl().splitlines()]
        rows[6]["payload"]["index"] = 999  # seq 7
        assert oracles.oracle_first_bad_seq(rows) == 7

    def test_jsonl_round_trip(self, tmp_path):
        log = _filled_log(10)
        path = tmp_path / "audit.jsonl"
        log.write_jsonl(str(path))
        records, first_bad = load_audit_jsonl(str(path))
        assert first_bad is None
        assert len(records) == 10
        assert verify_chain(records) is None

    def test_single_byte_flip_detected(self, tmp_path):
        log = _filled_log(12)
        path = tmp_path / "audit.jsonl"
        log.write_jsonl(str(path))
        raw = path.read_bytes()
        lines = raw.split(b"\n")
        # flip one byte inside record 7's payload
        target = bytearray(lines[6])
        pos = target.find(b'"index":6')
        assert pos != -1
        target[pos + len(b'"index":')] = ord("9")
        lines[6] = bytes(target)
        path.write_bytes(b"\n".join(lines))
        _, first_bad = load_audit_jsonl(str(path))
        assert first_bad == 7

    def test_truncation_detected(self, tmp_path):
        log = _filled_log(5)
        path = tmp_path / "audit.jsonl"
        log.write_jsonl(str(path))
        lines = path.read_text().splitlines()
        del lines[2]  # drop seq 3
        path.write_text("\n".join(lines) + "\n")
        _, first_bad = load_audit_jsonl(str(path))
        assert first_bad == 3

    def test_every_byte_flip_is_detected(self, tmp_path):
        # Exhaustively corrupt one record: every single-byte substitution in
        # line 3 must break verification at or before seq 3.
        log = _filled_log(4)
        path = tmp_path / "audit.jsonl"
        log.write_jsonl(str(path))
        original = path.read_bytes().split(b"\n")
        line = original[2]
        for pos in range(len(line)):
            mutated = bytearray(line)
            mutated[pos] = (mutated[pos] + 1) % 128 or 32
            if bytes(mutated) == line:
                continue
            corrupted = list(original)
            corrupted[2] = bytes(mutated)
            path.write_bytes(b"\n".join(corrupted))
            _, first_bad = load_audit_jsonl(str(path))
            assert first_bad is not None and first_bad <= 3, f"byte {pos} escaped detection"
