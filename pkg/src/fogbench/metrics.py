"""Application metrics derived from raw timings, and their aggregation."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, fields
from typing import Optional, Sequence

from .errors import EmptyInput, HeterogeneousKey


@dataclass(frozen=True)
class TimingBreakdown:
    t1_flight: float = 0.0
    et_exec: float = 0.0
    t2_store: float = 0.0
    t3_results: float = 0.0
    t4_offload: float = 0.0
    bytes_up: int = 0
    bytes_down: int = 0
    bytes_down_cloud_edge: int = 0
    file_length: Optional[float] = None


@dataclass(frozen=True)
class AppMetrics:
    rtt: float
    communication_latency: float
    complete_computation_latency: float
    complete_communication_latency: float
    cost: float
    rtf: Optional[float]
    bytes_up_rate: float
    bytes_down_rate: float
    bytes_down_cloud_edge_rate: float


def estimate_cost(et: float, rate: float) -> float:
    """Linear on-demand pricing: ``et`` seconds at ``rate`` per hour."""
    return round(et / 3600.0 * rate, 6)


def _rate(nbytes: float, seconds: float) -> float:
    return nbytes / seconds if seconds > 0 else 0.0


def compute_app_metrics(t: TimingBreakdown, cost_rate_per_hour: float) -> AppMetrics:
    rtt = t.t1_flight + t.et_exec + t.t3_results
    cl = t.t1_flight + t.t3_results
    return AppMetrics(
        rtt=rtt,
        communication_latency=cl,
        complete_computation_latency=rtt + t.t4_offload,
        complete_communication_latency=cl + t.t4_offload,
        cost=estimate_cost(t.et_exec, cost_rate_per_hour),
        rtf=t.et_exec / t.file_length if t.file_length else None,
        bytes_up_rate=_rate(t.bytes_up, t.t1_flight),
        bytes_down_rate=_rate(t.bytes_down, t.t3_results),
        bytes_down_cloud_edge_rate=_rate(t.bytes_down_cloud_edge, t.t4_offload),
    )


def identity_violations(t: TimingBreakdown, m: AppMetrics) -> list[str]:
    """Re-derive every latency identity and rate from ``t``; return mismatches.

    The sums are evaluated in the documented order so equality is exact.
    """
    bad = []
    checks = {
        "rtt": (m.rtt, t.t1_flight + t.et_exec + t.t3_results),
        "cl": (m.communication_latency, t.t1_flight + t.t3_results),
        "complete_comp": (m.complete_computation_latency, m.rtt + t.t4_offload),
        "complete_comm": (m.complete_communication_latency, t.t1_flight + t.t3_results + t.t4_offload),
    }
    for name, (got, want) in checks.items():
        if not _within_ulp(got, want):
            bad.append(f"{name}: {got!r} != {want!r}")
    for name, nbytes, secs, got in (
        ("rate_up", t.bytes_up, t.t1_flight, m.bytes_up_rate),
        ("rate_down", t.bytes_down, t.t3_results, m.bytes_down_rate),
        ("rate_down_ce", t.bytes_down_cloud_edge, t.t4_offload, m.bytes_down_cloud_edge_rate),
    ):
        want = nbytes / secs if secs > 0 else 0.0
        if not _within_ulp(got, want):
            bad.append(f"{name}: {got!r} != {want!r}")
    return bad


def _within_ulp(a: float, b: float) -> bool:
    return a == b or abs(a - b) <= math.ulp(max(abs(a), abs(b)))


METRIC_FIELDS = tuple(f.name for f in fields(AppMetrics))


@dataclass(frozen=True)
class Stat:
    mean: float
    stddev: float


@dataclass(frozen=True)
class AggregateMetrics:
    stats: dict
    repetition_count: int

    def __getitem__(self, metric: str) -> Stat:
        return self.stats[metric]


def mean_and_stddev(values: Sequence[float]) -> Stat:
    """Mean and sample (n-1) standard deviation; stddev is 0 for one value."""
    if len(values) == 1:
        return Stat(float(values[0]), 0.0)
    return Stat(statistics.fmean(values), statistics.stdev(values))


def aggregate(metrics: Sequence[AppMetrics], keys: Optional[Sequence] = None) -> AggregateMetrics:
    """Per-field mean and sample stddev across repetitions.

    ``keys`` (one per element) must all be equal when given.  Fields that are
    absent (``None``) on every record stay absent.
    """
    if not metrics:
        raise EmptyInput("aggregate needs at least one record")
    if keys is not None:
        first = keys[0]
        for k in keys[1:]:
            if k != first:
                raise HeterogeneousKey(f"cannot aggregate {first!r} with {k!r}")
    stats = {}
    for name in METRIC_FIELDS:
        vals = [getattr(m, name) for m in metrics]
        present = [v for v in vals if v is not None]
        if not present:
            stats[name] = None
        elif len(present) != len(vals):
            raise HeterogeneousKey(f"metric {name} present on some records only")
        else:
            stats[name] = mean_and_stddev(present)
    return AggregateMetrics(stats, len(metrics))
