import math
import statistics

import pytest
from hypothesis import given, strategies as st

from fogbench.errors import EmptyInput, HeterogeneousKey
from fogbench.metrics import (TimingBreakdown, aggregate, compute_app_metrics, estimate_cost, identity_violations,
                              mean_and_stddev)

pos = st.floats(0, 1e4, allow_nan=False)
nbytes = st.integers(0, 10**10)


def test_example_breakdown():
    t = TimingBreakdown(0.1, 2.0, 0.05, 0.2, 1.5, 1000, 500, 3000)
    m = compute_app_metrics(t, 0.0944)
    assert m.rtt == 0.1 + 2.0 + 0.2
    assert m.communication_latency == 0.1 + 0.2
    assert m.complete_computation_latency == m.rtt + 1.5
    assert m.complete_communication_latency == 0.1 + 0.2 + 1.5
    assert m.bytes_up_rate == 1000 / 0.1 and m.bytes_down_cloud_edge_rate == 3000 / 1.5
    assert m.rtf is None


def test_estimate_cost_hand_value():
    assert estimate_cost(1234.0, 0.0944) == round(1234 * 0.0944 / 3600, 6) == 0.032358
    assert estimate_cost(0.0, 5.0) == 0.0


def test_rtf():
    m = compute_app_metrics(TimingBreakdown(et_exec=2.5, file_length=5.0), 0)
    assert m.rtf == 0.5


@given(pos, pos, pos, pos, pos, nbytes, nbytes, nbytes, st.one_of(st.none(), st.floats(0.1, 100)))
def test_identities_hold(t1, et, t2, t3, t4, up, down, ce, fl):
    t = TimingBreakdown(t1, et, t2, t3, t4, up, down, ce, fl)
    m = compute_app_metrics(t, 1.0)
    assert identity_violations(t, m) == []
    assert m.rtt >= m.communication_latency
    assert m.complete_computation_latency >= m.rtt


def test_identity_violation_detected():
    from dataclasses import replace
    t = TimingBreakdown(0.1, 0.2, 0, 0.3)
    m = replace(compute_app_metrics(t, 0), rtt=1.0)
    assert identity_violations(t, m) and "rtt" in identity_violations(t, m)[0]


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200))
def test_stats_oracle(xs):
    s = mean_and_stddev(xs)
    mean = math.fsum(xs) / len(xs)
    var = math.fsum((x - mean) ** 2 for x in xs) / (len(xs) - 1)
    assert s.mean == pytest.approx(mean, rel=1e-9, abs=1e-6)
    assert s.stddev == pytest.approx(math.sqrt(var), rel=1e-9, abs=1e-6)


def test_single_value_stddev_zero():
    s = mean_and_stddev([3.0])
    assert (s.mean, s.stddev) == (3.0, 0.0)


def test_aggregate():
    ms = [compute_app_metrics(TimingBreakdown(i, 1, 0, 1), 0) for i in range(1, 4)]
    a = aggregate(ms)
    assert a.repetition_count == 3
    assert a["rtt"].mean == statistics.fmean([3, 4, 5]) and a["rtt"].stddev == 1.0
    assert a["rtf"] is None
    with pytest.raises(EmptyInput):
        aggregate([])
    with pytest.raises(HeterogeneousKey):
        aggregate(ms, keys=["a", "a", "b"])
    mixed = ms + [compute_app_metrics(TimingBreakdown(1, 1, 0, 1, file_length=2), 0)]
    with pytest.raises(HeterogeneousKey):
        aggregate(mixed)
