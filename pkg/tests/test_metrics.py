import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsb.errors import EmptyInput
from nsb.metrics import PHASES, cdf, percentile, resource_summary, summarize_phase
from nsb.orchestrator import phase_schedule
from nsb.probe import ProbeSample
from nsb.runtime.base import ResourceSample


def brute_force_percentile(values, q):
    ordered = sorted(values)
    return ordered[math.ceil(q / 100.0 * len(ordered)) - 1]


def test_worked_examples():
    assert percentile(list(range(1, 101)), 95) == 95
    assert percentile([5, 1, 3], 50) == 3
    assert percentile([7], 99) == 7
    assert percentile([1, 2], 50) == 1
    assert percentile([1, 2], 100) == 2


def test_input_validation():
    with pytest.raises(EmptyInput):
        percentile([], 50)
    for bad_q in (0, -1, 100.001, 200):
        with pytest.raises(ValueError):
            percentile([1.0], bad_q)


@settings(max_examples=200, deadline=None)
@given(values=st.lists(st.floats(min_value=0, max_value=1e6,
                                 allow_nan=False), min_size=1, max_size=500),
       q=st.floats(min_value=0.001, max_value=100.0))
def test_matches_sort_index_oracle(values, q):
    assert percentile(values, q) == brute_force_percentile(values, q)


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.floats(min_value=0, max_value=1e6,
                                 allow_nan=False), min_size=1, max_size=200),
       q1=st.floats(min_value=0.001, max_value=100.0),
       q2=st.floats(min_value=0.001, max_value=100.0))
def test_monotone_in_q(values, q1, q2):
    lo, hi = sorted((q1, q2))
    assert percentile(values, lo) <= percentile(values, hi)


def test_percentile_ignores_input_order():
    rng = random.Random(7)
    values = [rng.uniform(0, 2000) for _ in range(257)]
    shuffled = values[:]
    rng.shuffle(shuffled)
    for q in (50, 95, 99):
        assert percentile(values, q) == percentile(shuffled, q)


# --- phase summaries -----------------------------------------------------------


def _sample(t, phase, success, latency, censored):
    return ProbeSample(t=t, phase=phase, success=success, latency_ms=latency,
                       censored_latency_ms=censored,
                       error_kind=None if success else "timeout")


def test_mixed_phase_summary():
    # 5 successes at 10 ms + 4 failures censored at 2000 ms
    samples = ([_sample(i * 0.1, "attack", True, 10.0, 10.0) for i in range(5)]
               + [_sample(1 + i * 0.1, "attack", False, None, 2000.0)
                  for i in range(4)])
    row = summarize_phase(samples, "L3", "attack").to_dict()
    assert row["samples"] == 9
    assert row["success_rate"] == 55.6
    assert row["failure_rate"] == 44.4
    assert row["p50_ms"] == 10.0
    assert row["p95_ms"] == 2000.0
    assert row["p99_ms"] == 2000.0


def test_summary_permutation_invariant():
    rng = random.Random(11)
    samples = [_sample(i * 0.1, "warmup", True, v, v)
               for i, v in enumerate(rng.uniform(1, 50) for _ in range(48))]
    shuffled = samples[:]
    rng.shuffle(shuffled)
    assert (summarize_phase(samples, "L0", "warmup").to_dict()
            == summarize_phase(shuffled, "L0", "warmup").to_dict())


def test_empty_phase_summary():
    row = summarize_phase([], "L0", "cooldown", cell_id="x")
    assert row.samples == 0
    assert row.success_rate is None
    assert row.p50_ms is None
    assert row.to_dict()["p99_ms"] is None


def test_all_failures_pin_percentiles_to_censor_value():
    samples = [_sample(i * 0.1, "attack", False, None, 2000.0) for i in range(10)]
    row = summarize_phase(samples, "L3", "attack")
    assert row.success_rate == 0.0
    assert row.p50_ms == row.p95_ms == row.p99_ms == 2000.0


# --- CDF -----------------------------------------------------------------------


def test_cdf_points():
    series = cdf([30.0, 10.0, 20.0, 20.0])
    assert series.points == ((10.0, 0.25), (20.0, 0.5), (20.0, 0.75), (30.0, 1.0))


def test_cdf_reaches_one_and_is_sorted():
    series = cdf([5.0, 1.0, 9.0])
    xs = [p[0] for p in series.points]
    assert xs == sorted(xs)
    assert series.points[-1][1] == 1.0
    with pytest.raises(EmptyInput):
        cdf([])


# --- resource aggregation --------------------------------------------------------


def test_resource_summary_per_phase():
    windows = phase_schedule(1, 2, 1)
    samples = [
        ResourceSample(t=0.2, cpu_pct=5, load1=0.1, load5=0.1, load15=0.1, mem_pct=70),
        ResourceSample(t=0.7, cpu_pct=7, load1=0.2, load5=0.1, load15=0.1, mem_pct=72),
        ResourceSample(t=1.5, cpu_pct=80, load1=1.5, load5=0.4, load15=0.2, mem_pct=90),
        ResourceSample(t=2.5, cpu_pct=60, load1=2.0, load5=0.5, load15=0.2, mem_pct=88),
        ResourceSample(t=9.9, cpu_pct=99, load1=9, load5=9, load15=9, mem_pct=99),
    ]
    out = resource_summary(samples, windows)
    assert set(out) == set(PHASES)
    assert out["warmup"]["cpu_mean"] == 6.0
    assert out["warmup"]["cpu_max"] == 7
    assert out["attack"]["cpu_max"] == 80
    assert out["attack"]["load1_max"] == 2.0
    assert out["attack"]["mem_max"] == 90
    assert out["cooldown"] == {}  # no samples fell in [3, 4); t=9.9 is unlabeled
    assert out["attack"]["cpu_max"] > out["warmup"]["cpu_max"]
