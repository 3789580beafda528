"""Per-phase quantitative layer: success rates, censored latency percentiles
(nearest-rank p50/p95/p99), CDF points, and resource aggregates."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyInput

PHASES = ("warmup", "attack", "cooldown")


def percentile(values, q) -> float:
    """Nearest-rank percentile: sort ascending, take the 1-based element at
    ceil(q/100 * n). q must lie in (0, 100]."""
    if not values:
        raise EmptyInput("percentile of empty input")
    if not 0 < q <= 100:
        raise ValueError(f"q must be in (0, 100], got {q}")
    ordered = sorted(values)
    rank = math.ceil(q / 100.0 * len(ordered))
    return ordered[rank - 1]


@dataclass(frozen=True)
class PhaseSummary:
    cell_id: str
    level: str
    phase: str
    samples: int
    success_rate: float | None   # percent
    failure_rate: float | None
    p50_ms: float | None
    p95_ms: float | None
    p99_ms: float | None

    def to_dict(self) -> dict:
        def r1(v):
            return None if v is None else round(v, 1)
        def r2(v):
            return None if v is None else round(v, 2)
        return {
            "cell_id": self.cell_id,
            "level": self.level,
            "phase": self.phase,
            "samples": self.samples,
            "success_rate": r1(self.success_rate),
            "failure_rate": r1(self.failure_rate),
            "p50_ms": r2(self.p50_ms),
            "p95_ms": r2(self.p95_ms),
            "p99_ms": r2(self.p99_ms),
        }


def summarize_phase(samples, level, phase, cell_id="") -> PhaseSummary:
    """Aggregate one phase. Percentiles run over the censored latency of ALL
    samples: failures contribute the censor value, which is what caps the
    reported tail at the probe timeout."""
    n = len(samples)
    if n == 0:
        return PhaseSummary(cell_id=cell_id, level=level, phase=phase, samples=0,
                            success_rate=None, failure_rate=None,
                            p50_ms=None, p95_ms=None, p99_ms=None)
    successes = sum(1 for s in samples if s.success)
    censored = [s.censored_latency_ms for s in samples]
    success_rate = 100.0 * successes / n
    return PhaseSummary(
        cell_id=cell_id, level=level, phase=phase, samples=n,
        success_rate=success_rate, failure_rate=100.0 - success_rate,
        p50_ms=percentile(censored, 50),
        p95_ms=percentile(censored, 95),
        p99_ms=percentile(censored, 99),
    )


@dataclass(frozen=True)
class CdfSeries:
    points: tuple  # of (latency_ms, cumulative_fraction)


def cdf(values) -> CdfSeries:
    if not values:
        raise EmptyInput("cdf of empty input")
    ordered = sorted(values)
    n = len(ordered)
    return CdfSeries(points=tuple((v, (i + 1) / n) for i, v in enumerate(ordered)))


def resource_summary(samples, windows) -> dict:
    """Per-phase aggregates over a timestamp-sorted ResourceSample series.
    Phases with no samples yield an empty dict."""
    from .orchestrator import label_phase  # local import avoids a cycle

    grouped = {phase: [] for phase in PHASES}
    for s in samples:
        phase = label_phase(s.t, windows)
        if phase is not None:
            grouped[phase].append(s)

    out = {}
    for phase, group in grouped.items():
        if not group:
            out[phase] = {}
            continue
        cpu = [s.cpu_pct for s in group]
        mem = [s.mem_pct for s in group]
        out[phase] = {
            "cpu_mean": sum(cpu) / len(cpu),
            "cpu_max": max(cpu),
            "load1_max": max(s.load1 for s in group),
            "mem_mean": sum(mem) / len(mem),
            "mem_max": max(mem),
        }
    return out
