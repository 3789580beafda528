"""Scenario catalog: load and validate declarative attack/service/benign specs.

One YAML file per scenario under ``<root>/attacks``, ``<root>/services`` and
``<root>/benign``. The schema is documented in docs/catalog-schema.md. Loading
is pure: the same file bytes always produce the same Catalog, including its
source digest.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import (
    MissingFile,
    OutOfBounds,
    ParseError,
    TypeMismatch,
    UnknownParameter,
    ValidationError,
)
from .util import parse_duration

_ID_RE = re.compile(r"^[a-z0-9_-]+$")
_TACTIC_RE = re.compile(r"^TA\d{4}$")
_TECHNIQUE_RE = re.compile(r"^T\d{4}(\.\d{3})?$")
_HOOK_REF_RE = re.compile(r"\$\{(\w+)\}")

PARAM_KINDS = ("integer", "real", "string", "duration", "enum")


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str
    default: object
    min: float | None = None
    max: float | None = None
    choices: tuple = ()


@dataclass(frozen=True)
class AttackSpec:
    id: str
    description: str
    image_ref: str
    hook: str
    parameters: tuple = ()
    mitre_tactics: tuple = ()
    mitre_techniques: tuple = ()
    notes: str = ""

    def param(self, name):
        for p in self.parameters:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class ReadinessSpec:
    path: str = "/"
    timeout_s: float = 30.0


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    image_ref: str
    protocol: str
    port: int
    readiness: ReadinessSpec = field(default_factory=ReadinessSpec)
    capacity_limit: int | None = None


@dataclass(frozen=True)
class BenignProfile:
    id: str
    service_ref: str
    client_count: int
    interarrival_s: float
    duration_s: float


@dataclass(frozen=True)
class Catalog:
    attacks: dict
    services: dict
    benign: dict
    source_digest: str


# --- parameter coercion / validation -----------------------------------------


def _coerce_value(spec: ParameterSpec, value):
    """Coerce a raw value to the parameter kind; raise on mismatch/violation."""
    kind = spec.kind
    if kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(spec.name, "integer", value)
        out = value
    elif kind == "real":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(spec.name, "real", value)
        out = float(value)
    elif kind == "duration":
        try:
            out = parse_duration(value)
        except (ValueError, TypeError):
            raise TypeMismatch(spec.name, "duration", value)
    elif kind == "string":
        if not isinstance(value, str):
            raise TypeMismatch(spec.name, "string", value)
        out = value
    elif kind == "enum":
        if value not in spec.choices:
            raise OutOfBounds(spec.name, value, list(spec.choices))
        out = value
    else:  # pragma: no cover - kinds validated at load time
        raise TypeMismatch(spec.name, "known kind", kind)

    if kind in ("integer", "real", "duration"):
        if spec.min is not None and out < spec.min:
            raise OutOfBounds(spec.name, out, (spec.min, spec.max))
        if spec.max is not None and out > spec.max:
            raise OutOfBounds(spec.name, out, (spec.min, spec.max))
    return out


def resolve_parameters(spec: AttackSpec, overrides: dict) -> dict:
    """Return the complete name->value map: overrides where given, defaults
    elsewhere. Every value is checked against kind, bounds and choices."""
    declared = {p.name: p for p in spec.parameters}
    for name in overrides:
        if name not in declared:
            raise UnknownParameter(name)
    resolved = {}
    for name, pspec in declared.items():
        raw = overrides.get(name, pspec.default)
        resolved[name] = _coerce_value(pspec, raw)
    return resolved


# --- loading ------------------------------------------------------------------


def _load_yaml(path: Path):
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = (mark.line + 1) if mark is not None else 0
        raise ParseError(path, line, str(exc).replace("\n", " "))
    if not isinstance(data, dict):
        raise ParseError(path, 1, "top level must be a mapping")
    return data


def _check_keys(data, allowed, required, sid, where, violations):
    for key in data:
        if key not in allowed:
            violations.append((sid, key, f"unknown key in {where}"))
    for key in required:
        if key not in data:
            violations.append((sid, key, f"missing required key in {where}"))


def _parse_param(raw, sid, violations):
    if not isinstance(raw, dict):
        violations.append((sid, "params", "each parameter must be a mapping"))
        return None
    _check_keys(raw, {"name", "kind", "default", "min", "max", "choices"},
                {"name", "kind", "default"}, sid, "params entry", violations)
    name = raw.get("name")
    kind = raw.get("kind")
    if not isinstance(name, str) or not name:
        violations.append((sid, "params.name", "must be a non-empty string"))
        return None
    if kind not in PARAM_KINDS:
        violations.append((sid, f"params.{name}.kind", f"must be one of {PARAM_KINDS}"))
        return None

    choices = tuple(raw.get("choices") or ())
    if kind == "enum" and not choices:
        violations.append((sid, f"params.{name}.choices", "enum requires non-empty choices"))
        return None

    lo, hi = raw.get("min"), raw.get("max")
    if kind == "duration":
        try:
            lo = parse_duration(lo) if lo is not None else None
            hi = parse_duration(hi) if hi is not None else None
        except ValueError:
            violations.append((sid, f"params.{name}", "invalid duration bound"))
            return None
    if lo is not None and hi is not None and lo > hi:
        violations.append((sid, f"params.{name}", f"min {lo} > max {hi}"))
        return None

    pspec = ParameterSpec(name=name, kind=kind, default=raw.get("default"),
                          min=lo, max=hi, choices=choices)
    try:
        _coerce_value(pspec, pspec.default)
    except (TypeMismatch, OutOfBounds) as exc:
        violations.append((sid, f"params.{name}.default", str(exc)))
        return None
    return pspec


def _parse_attack(path, data, violations):
    sid = data.get("id", path.stem)
    _check_keys(data, {"id", "description", "image", "hook", "params", "mitre", "notes"},
                {"id", "description", "image", "hook"}, sid, str(path.name), violations)
    if not isinstance(sid, str) or not _ID_RE.match(sid or ""):
        violations.append((sid, "id", "must match [a-z0-9_-]+"))

    params = []
    for raw in data.get("params") or []:
        p = _parse_param(raw, sid, violations)
        if p is not None:
            params.append(p)
    declared = {p.name for p in params}

    hook = data.get("hook") or ""
    for ref in _HOOK_REF_RE.findall(str(hook)):
        if ref not in declared:
            violations.append((sid, "hook", f"references undeclared parameter {ref!r}"))

    mitre = data.get("mitre") or {}
    if not isinstance(mitre, dict):
        violations.append((sid, "mitre", "must be a mapping"))
        mitre = {}
    _check_keys(mitre, {"tactics", "techniques"}, set(), sid, "mitre", violations)
    tactics = tuple(mitre.get("tactics") or ())
    techniques = tuple(mitre.get("techniques") or ())
    for t in tactics:
        if not isinstance(t, str) or not _TACTIC_RE.match(t):
            violations.append((sid, "mitre.tactics", f"{t!r} does not match TA####"))
    for t in techniques:
        if not isinstance(t, str) or not _TECHNIQUE_RE.match(t):
            violations.append((sid, "mitre.techniques", f"{t!r} does not match T#### or T####.###"))

    return AttackSpec(
        id=str(sid),
        description=str(data.get("description") or ""),
        image_ref=str(data.get("image") or ""),
        hook=str(hook),
        parameters=tuple(params),
        mitre_tactics=tactics,
        mitre_techniques=techniques,
        notes=str(data.get("notes") or ""),
    )


def _parse_service(path, data, violations):
    sid = data.get("id", path.stem)
    _check_keys(data, {"id", "image", "protocol", "port", "readiness", "capacity_limit"},
                {"id", "image", "protocol", "port"}, sid, str(path.name), violations)
    if not isinstance(sid, str) or not _ID_RE.match(sid or ""):
        violations.append((sid, "id", "must match [a-z0-9_-]+"))
    protocol = data.get("protocol")
    if protocol not in ("http", "tcp"):
        violations.append((sid, "protocol", "must be http or tcp"))
        protocol = "http"
    port = data.get("port")
    if not isinstance(port, int) or isinstance(port, bool) or not (1 <= port <= 65535):
        violations.append((sid, "port", "must be an integer in 1..65535"))
        port = 0

    readiness = ReadinessSpec()
    raw_ready = data.get("readiness")
    if raw_ready is not None:
        if not isinstance(raw_ready, dict):
            violations.append((sid, "readiness", "must be a mapping"))
        else:
            _check_keys(raw_ready, {"path", "timeout"}, set(), sid, "readiness", violations)
            try:
                timeout = parse_duration(raw_ready.get("timeout", 30))
            except ValueError:
                violations.append((sid, "readiness.timeout", "invalid duration"))
                timeout = 30.0
            readiness = ReadinessSpec(path=str(raw_ready.get("path", "/")), timeout_s=timeout)

    capacity = data.get("capacity_limit")
    if capacity is not None and (not isinstance(capacity, int) or isinstance(capacity, bool) or capacity < 1):
        violations.append((sid, "capacity_limit", "must be a positive integer"))
        capacity = None

    return ServiceSpec(id=str(sid), image_ref=str(data.get("image") or ""),
                       protocol=str(protocol), port=port, readiness=readiness,
                       capacity_limit=capacity)


def _parse_benign(path, data, violations):
    sid = data.get("id", path.stem)
    _check_keys(data, {"id", "service", "clients", "interarrival", "duration"},
                {"id", "service", "clients", "interarrival", "duration"},
                sid, str(path.name), violations)
    if not isinstance(sid, str) or not _ID_RE.match(sid or ""):
        violations.append((sid, "id", "must match [a-z0-9_-]+"))
    clients = data.get("clients")
    if not isinstance(clients, int) or isinstance(clients, bool) or clients < 1:
        violations.append((sid, "clients", "must be an integer >= 1"))
        clients = 1
    try:
        interarrival = parse_duration(data.get("interarrival", ""))
        if interarrival <= 0:
            raise ValueError
    except ValueError:
        violations.append((sid, "interarrival", "must be a positive duration"))
        interarrival = 1.0
    try:
        duration = parse_duration(data.get("duration", ""))
        if duration <= 0:
            raise ValueError
    except ValueError:
        violations.append((sid, "duration", "must be a positive duration"))
        duration = 1.0
    return BenignProfile(id=str(sid), service_ref=str(data.get("service") or ""),
                         client_count=clients, interarrival_s=interarrival,
                         duration_s=duration)


def load_catalog(root_path) -> Catalog:
    """Load every scenario file under root_path and return a validated Catalog.

    Validation errors are aggregated: the raised ValidationError enumerates
    every violation found across all files.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise MissingFile(root)

    files = []
    for sub in ("attacks", "services", "benign"):
        d = root / sub
        if d.is_dir():
            for p in sorted(d.iterdir()):
                if p.suffix in (".yaml", ".yml") and p.is_file():
                    files.append((sub, p))
    if not files:
        raise MissingFile(f"{root} (no scenario files found)")

    digest = hashlib.sha256()
    for _, p in sorted(files, key=lambda item: str(item[1].relative_to(root))):
        rel = str(p.relative_to(root))
        data = p.read_bytes()
        digest.update(rel.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(data)
        digest.update(b"\x00")

    violations = []
    attacks, services, benign = {}, {}, {}
    for sub, p in files:
        data = _load_yaml(p)
        if sub == "attacks":
            spec = _parse_attack(p, data, violations)
            bucket = attacks
        elif sub == "services":
            spec = _parse_service(p, data, violations)
            bucket = services
        else:
            spec = _parse_benign(p, data, violations)
            bucket = benign
        if spec.id in bucket:
            violations.append((spec.id, "id", f"duplicate id in {sub}"))
        else:
            bucket[spec.id] = spec

    for prof in benign.values():
        if prof.service_ref not in services:
            violations.append((prof.id, "service", f"dangling reference {prof.service_ref!r}"))

    if violations:
        raise ValidationError(violations)
    return Catalog(attacks=attacks, services=services, benign=benign,
                   source_digest=digest.hexdigest())
