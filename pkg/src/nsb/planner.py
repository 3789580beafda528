"""Experiment planning: the (scenario, parameters, baseline, instrumentation,
repetition) tuple and its deterministic expansion into an execution matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .catalog import Catalog, resolve_parameters
from .errors import EmptySelection, ParseError, UnresolvedReference
from .util import digest_of, parse_duration

LEVEL_LABELS = ("L0", "L1", "L2", "L3")


@dataclass(frozen=True)
class IntensityLevel:
    label: str
    rate_limit: float | None  # requests-or-packets per second; None = unlimited

    @property
    def unlimited(self) -> bool:
        return self.rate_limit is None

    def __post_init__(self):
        if self.rate_limit is not None and self.rate_limit <= 0:
            raise ValueError(f"{self.label}: finite rate_limit must be > 0")


def default_levels() -> list[IntensityLevel]:
    """The built-in intensity ladder: 100/s at L0, decade steps, unlimited L3."""
    return [
        IntensityLevel("L0", 100),
        IntensityLevel("L1", 1000),
        IntensityLevel("L2", 10000),
        IntensityLevel("L3", None),
    ]


def levels_by_label(labels) -> list[IntensityLevel]:
    table = {lv.label: lv for lv in default_levels()}
    out = []
    for label in labels:
        if label not in table:
            raise UnresolvedReference("level", label)
        out.append(table[label])
    return out


@dataclass(frozen=True)
class ProbePlan:
    protocol: str = "http"
    path: str = "/"
    interval_s: float = 0.1
    timeout_s: float = 2.0


@dataclass(frozen=True)
class Instrumentation:
    capture: bool = False
    capture_filter: str = ""
    capture_iface: str = "lo"
    extract_features: bool = True
    probe: ProbePlan = field(default_factory=ProbePlan)
    extra_tracks: tuple = ()  # registered external extractor tracks


@dataclass(frozen=True)
class ExperimentSpec:
    service_ids: tuple
    attack_ids: tuple
    overrides: dict            # attack_id -> {param: value}
    levels: tuple              # of IntensityLevel
    baseline: str | None
    instrumentation: Instrumentation
    repetitions: int
    warmup_s: float
    attack_s: float
    cooldown_s: float

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for name in ("warmup_s", "attack_s", "cooldown_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        finite = [lv.rate_limit for lv in self.levels if lv.rate_limit is not None]
        if finite != sorted(finite):
            raise ValueError("finite level rates must be non-decreasing")

    def to_dict(self) -> dict:
        return {
            "services": list(self.service_ids),
            "attacks": list(self.attack_ids),
            "overrides": {k: dict(v) for k, v in sorted(self.overrides.items())},
            "levels": [
                {"label": lv.label, "rate": lv.rate_limit} for lv in self.levels
            ],
            "baseline": self.baseline,
            "instrumentation": {
                "capture": self.instrumentation.capture,
                "capture_filter": self.instrumentation.capture_filter,
                "capture_iface": self.instrumentation.capture_iface,
                "extract_features": self.instrumentation.extract_features,
                "probe": {
                    "protocol": self.instrumentation.probe.protocol,
                    "path": self.instrumentation.probe.path,
                    "interval_s": self.instrumentation.probe.interval_s,
                    "timeout_s": self.instrumentation.probe.timeout_s,
                },
            },
            "repetitions": self.repetitions,
            "warmup_s": self.warmup_s,
            "attack_s": self.attack_s,
            "cooldown_s": self.cooldown_s,
        }

    def digest(self) -> str:
        return digest_of(self.to_dict())


@dataclass(frozen=True)
class MatrixCell:
    cell_id: str
    service_id: str
    attack_id: str
    level: IntensityLevel
    repetition: int
    params: dict
    warmup_s: float
    attack_s: float
    cooldown_s: float


@dataclass(frozen=True)
class ExecutionMatrix:
    cells: tuple
    spec_digest: str


def _cell_params(attack, overrides, level, attack_s):
    """Resolve declared params, then inject the runtime-owned rate/duration
    values when the attack declares those parameters. Unlimited rate is
    serialized as 0 (no pacing)."""
    merged = dict(overrides)
    if attack.param("rate") is not None:
        merged["rate"] = 0 if level.unlimited else int(level.rate_limit)
    if attack.param("duration") is not None:
        merged["duration"] = attack_s
    return resolve_parameters(attack, merged)


def expand_matrix(spec: ExperimentSpec, catalog: Catalog) -> ExecutionMatrix:
    """Expand service x attack x level x repetition into an ordered matrix."""
    if not spec.service_ids or not spec.attack_ids or not spec.levels:
        raise EmptySelection("experiment selects no services, attacks, or levels")
    for sid in spec.service_ids:
        if sid not in catalog.services:
            raise UnresolvedReference("service", sid)
    for aid in spec.attack_ids:
        if aid not in catalog.attacks:
            raise UnresolvedReference("attack", aid)
    if spec.baseline is not None and spec.baseline not in catalog.benign:
        raise UnresolvedReference("benign", spec.baseline)

    cells = []
    for sid in spec.service_ids:
        for aid in spec.attack_ids:
            attack = catalog.attacks[aid]
            for level in spec.levels:
                params = _cell_params(attack, spec.overrides.get(aid, {}),
                                      level, spec.attack_s)
                for rep in range(1, spec.repetitions + 1):
                    cells.append(MatrixCell(
                        cell_id=f"{sid}/{aid}/{level.label}/rep{rep}",
                        service_id=sid,
                        attack_id=aid,
                        level=level,
                        repetition=rep,
                        params=params,
                        warmup_s=spec.warmup_s,
                        attack_s=spec.attack_s,
                        cooldown_s=spec.cooldown_s,
                    ))
    return ExecutionMatrix(cells=tuple(cells), spec_digest=spec.digest())


@dataclass(frozen=True)
class PlanReport:
    rows: tuple          # of (cell_id, service, attack, level, rep, rate)
    estimated_s: float

    def render(self) -> str:
        lines = [f"{'cell':<40} {'rate':>10}  phases"]
        for cell_id, _, _, _, _, rate, phases in self.rows:
            lines.append(f"{cell_id:<40} {rate:>10}  {phases}")
        lines.append(f"total cells: {len(self.rows)}  estimated wall time: {self.estimated_s:g} s")
        return "\n".join(lines)


def plan_summary(matrix: ExecutionMatrix) -> PlanReport:
    rows = []
    total = 0.0
    for c in matrix.cells:
        total += c.warmup_s + c.attack_s + c.cooldown_s
        rate = "unlimited" if c.level.unlimited else f"{c.level.rate_limit:g}/s"
        phases = f"{c.warmup_s:g}s/{c.attack_s:g}s/{c.cooldown_s:g}s"
        rows.append((c.cell_id, c.service_id, c.attack_id, c.level.label,
                     c.repetition, rate, phases))
    return PlanReport(rows=tuple(rows), estimated_s=total)


def load_experiment(path, catalog: Catalog) -> ExperimentSpec:
    """Read an experiment file (YAML) into an ExperimentSpec."""
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(p, (mark.line + 1) if mark else 0, str(exc).replace("\n", " "))
    if not isinstance(data, dict):
        raise ParseError(p, 1, "experiment file must be a mapping")

    instr = data.get("instrumentation") or {}
    probe = instr.get("probe") or {}
    spec = ExperimentSpec(
        service_ids=tuple(data.get("services") or ()),
        attack_ids=tuple(data.get("attacks") or ()),
        overrides={k: dict(v) for k, v in (data.get("overrides") or {}).items()},
        levels=tuple(levels_by_label(data.get("levels") or ["L0", "L3"])),
        baseline=data.get("baseline"),
        instrumentation=Instrumentation(
            capture=bool(instr.get("capture", False)),
            capture_filter=str(instr.get("filter", "")),
            capture_iface=str(instr.get("iface", "lo")),
            extract_features=bool(instr.get("extract_features", True)),
            probe=ProbePlan(
                protocol=str(probe.get("protocol", "http")),
                path=str(probe.get("path", "/")),
                interval_s=parse_duration(probe.get("interval", 0.1)),
                timeout_s=parse_duration(probe.get("timeout", 2.0)),
            ),
        ),
        repetitions=int(data.get("repetitions", 1)),
        warmup_s=parse_duration(data.get("warmup", "5s")),
        attack_s=parse_duration(data.get("attack", "10s")),
        cooldown_s=parse_duration(data.get("cooldown", "5s")),
    )
    # fail fast on dangling references
    expand_matrix(spec, catalog)
    return spec
