"""Per-pipeline metric series with strictly increasing ticks.

A series is identified by (scope, name) where scope is a pipeline id or the
reserved "cluster" scope for global series. Samples are (tick, value) pairs
and export verbatim as two-column CSV.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

METRIC_NAMES = ("freshness_lag", "queue_depth", "failure_rate", "utilization", "cost", "ingress")

CLUSTER_SCOPE = "cluster"


class NonMonotonicTick(ValueError):
    pass


class UnknownSeries(KeyError):
    pass


@dataclass
class MetricStore:
    _series: dict[tuple[str, str], list[tuple[int, float]]] = field(default_factory=dict)

    def record_sample(self, scope: str, name: str, tick: int, value: float) -> None:
        key = (scope, name)
        samples = self._series.setdefault(key, [])
        if samples and tick <= samples[-1][0]:
            raise NonMonotonicTick(
                f"series {key}: tick {tick} is not after last tick {samples[-1][0]}"
            )
        samples.append((tick, value))

    def series(self, scope: str, name: str) -> list[tuple[int, float]]:
        key = (scope, name)
        if key not in self._series:
            raise UnknownSeries(f"no series {key}")
        return list(self._series[key])

    def series_keys(self) -> list[tuple[str, str]]:
        return sorted(self._series)

    def query_window(self, scope: str, name: str, window: int) -> list[tuple[int, float]]:
        """Samples with tick in (now - window, now], now = last recorded tick."""

        key = (scope, name)
        if key not in self._series:
            raise UnknownSeries(f"no series {key}")
        samples = self._series[key]
        if not samples:
            return []
        lo = samples[-1][0] - window
        # Ticks are recorded in ascending order, so the window is a tail
        # slice; scanning back from the end keeps this O(window).
        i = len(samples)
        while i > 0 and samples[i - 1][0] > lo:
            i -= 1
        return samples[i:]

    def last(self, scope: str, name: str) -> tuple[int, float] | None:
        key = (scope, name)
        samples = self._series.get(key)
        return samples[-1] if samples else None

    def to_csv(self, scope: str, name: str) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["tick", "value"])
        for tick, value in self.series(scope, name):
            writer.writerow([tick, _fmt(value)])
        return out.getvalue()


def _fmt(value: float) -> str:
    # Integral samples print without a trailing ".0" so CSV output is stable
    # and diff-friendly regardless of which code path produced the float.
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))
