"""Consolidation of run artifacts into labeled datasets, per-run metric
summaries, and rendered reports.

All outputs are UTF-8 CSV with LF line endings and deterministic ordering:
identical inputs render byte-identical files, so derived artifacts can be
deleted and regenerated from the raw evidence at any time."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import DigestMismatch, ManifestMissing, MissingSummary
from .metrics import PHASES, cdf, summarize_phase
from .orchestrator import MANIFEST_NAME, RunManifest
from .probe import read_probes_csv
from .util import sha256_file

DATASET_SCHEMA = 1

PROBE_DATASET_HEADER = [
    "cell_id", "service_id", "attack_id", "level", "repetition", "phase",
    "t_s", "success", "latency_ms", "censored_latency_ms", "error_kind",
    "aborted", "run_digest",
]

FLOW_FEATURE_COLUMNS = [
    "proto", "addr_lo", "port_lo", "addr_hi", "port_hi",
    "first_ts", "last_ts", "duration_s",
    "fwd_packets", "bwd_packets", "fwd_bytes", "bwd_bytes",
    "syn_count", "fin_count", "rst_count", "ack_count",
    "iat_mean_ms", "iat_std_ms",
]

FLOW_DATASET_HEADER = (
    ["cell_id", "service_id", "attack_id", "level", "repetition", "phase"]
    + FLOW_FEATURE_COLUMNS + ["aborted", "run_digest"]
)

SUMMARY_TABLE_HEADER = ["level", "phase", "samples", "success_pct",
                        "failure_pct", "p50_ms", "p95_ms", "p99_ms"]


# --- per-run metrics stage -----------------------------------------------------


def summarize_run(run_dir) -> list:
    """Compute per-phase summaries for one run and write summary.json."""
    run_dir = Path(run_dir)
    manifest = RunManifest.load(run_dir)
    samples = read_probes_csv(run_dir / "probes.csv")
    rows = []
    for phase in PHASES:
        phase_samples = [s for s in samples if s.phase == phase]
        rows.append(summarize_phase(phase_samples, manifest.level, phase,
                                    cell_id=manifest.cell_id).to_dict())
    (run_dir / "summary.json").write_text(
        json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return rows


# --- integrity -------------------------------------------------------------------


def verify_run(run_dir) -> RunManifest:
    """Re-verify every inventoried artifact digest; raise on any mismatch."""
    run_dir = Path(run_dir)
    if not (run_dir / MANIFEST_NAME).is_file():
        raise ManifestMissing(run_dir)
    manifest = RunManifest.load(run_dir)
    for rel, meta in manifest.artifacts.items():
        path = run_dir / rel
        if not path.is_file():
            raise DigestMismatch(run_dir, rel)
        if sha256_file(path) != meta["sha256"]:
            raise DigestMismatch(run_dir, rel)
    return manifest


# --- consolidation ----------------------------------------------------------------


def consolidate(run_dirs, out_path) -> dict:
    """Merge runs into probe_dataset.csv, flow_dataset.csv and index.json.

    Tampered or manifest-less runs are excluded with an integrity note,
    never silently; aborted runs are included but flagged."""
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)

    included, excluded = [], []
    verified = []
    for d in run_dirs:
        d = Path(d)
        try:
            manifest = verify_run(d)
        except (ManifestMissing, DigestMismatch) as exc:
            excluded.append({"run": d.name, "reason": str(exc)})
            continue
        verified.append((manifest, d))
    verified.sort(key=lambda item: (item[0].cell_id, item[1].name))

    probe_rows = 0
    flow_rows = 0
    with open(out / "probe_dataset.csv", "w", newline="", encoding="utf-8") as pfh, \
         open(out / "flow_dataset.csv", "w", newline="", encoding="utf-8") as ffh:
        pw = csv.writer(pfh, lineterminator="\n")
        fw = csv.writer(ffh, lineterminator="\n")
        pw.writerow(PROBE_DATASET_HEADER)
        fw.writerow(FLOW_DATASET_HEADER)
        for manifest, d in verified:
            run_digest = sha256_file(d / MANIFEST_NAME)
            aborted = "true" if manifest.outcome.get("status") == "aborted" else "false"
            label = [manifest.cell_id, manifest.service_id, manifest.attack_id,
                     manifest.level, manifest.repetition]
            probes_path = d / "probes.csv"
            n_probes = 0
            if probes_path.is_file():
                for s in read_probes_csv(probes_path):
                    r = s.row()  # [t, phase, success, latency, censored, error]
                    pw.writerow(label + [s.phase, r[0], r[2], r[3], r[4], r[5],
                                         aborted, run_digest])
                    n_probes += 1
            probe_rows += n_probes

            native = d / "features" / "native.csv"
            if native.is_file():
                with open(native, newline="", encoding="utf-8") as nfh:
                    for row in csv.DictReader(nfh):
                        fw.writerow(label + [row["phase"]]
                                    + [row[c] for c in FLOW_FEATURE_COLUMNS]
                                    + [aborted, run_digest])
                        flow_rows += 1
            included.append({"run": d.name, "cell_id": manifest.cell_id,
                             "aborted": aborted == "true",
                             "probe_rows": n_probes})

    index = {
        "schema_version": DATASET_SCHEMA,
        "included": included,
        "excluded": excluded,
        "integrity_failures": [e for e in excluded if "digest" in e["reason"]],
        "probe_rows": probe_rows,
        "flow_rows": flow_rows,
    }
    (out / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index


# --- reports --------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def _load_probe_groups(base: Path):
    """(level, phase) -> samples, plus per-sample timeline rows, from either a
    single run dir or a consolidated dataset dir."""
    if (base / MANIFEST_NAME).is_file():
        manifest = RunManifest.load(base)
        samples = read_probes_csv(base / "probes.csv")
        groups = {}
        timeline = []
        for s in samples:
            groups.setdefault((manifest.level, s.phase), []).append(s)
            timeline.append((s.t, manifest.level, s.phase, s.success,
                             s.censored_latency_ms))
        boundaries = [w["end"] for w in manifest.phases[:-1]]
        return groups, timeline, boundaries, manifest.cell_id
    if (base / "probe_dataset.csv").is_file():
        groups = {}
        timeline = []
        with open(base / "probe_dataset.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                from .probe import ProbeSample
                s = ProbeSample(
                    t=float(row["t_s"]), phase=row["phase"],
                    success=row["success"] == "true",
                    latency_ms=float(row["latency_ms"]) if row["latency_ms"] else None,
                    censored_latency_ms=float(row["censored_latency_ms"]),
                    error_kind=row["error_kind"] or None,
                )
                groups.setdefault((row["level"], s.phase), []).append(s)
                timeline.append((s.t, row["level"], s.phase, s.success,
                                 s.censored_latency_ms))
        return groups, timeline, [], "consolidated"
    raise MissingSummary(f"{base}: neither a run dir nor a consolidated dir")


def render_report(base_dir, svg=True) -> dict:
    """Emit report/ files for a run dir (requires summary.json) or a
    consolidated dataset dir. Deterministic output for identical inputs."""
    base = Path(base_dir)
    is_run = (base / MANIFEST_NAME).is_file()
    if is_run and not (base / "summary.json").is_file():
        raise MissingSummary(f"{base}: summary.json not found; run metrics first")

    groups, timeline, boundaries, _ = _load_probe_groups(base)
    report = base / "report"
    report.mkdir(exist_ok=True)
    files = []
    notes = []

    # Table-2-shaped summary: levels x phases
    levels = sorted({lv for lv, _ in groups})
    with open(report / "summary_table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_TABLE_HEADER)
        for lv in levels:
            for phase in PHASES:
                s = summarize_phase(groups.get((lv, phase), ()), lv, phase).to_dict()
                w.writerow([lv, phase, s["samples"], _fmt(s["success_rate"]),
                            _fmt(s["failure_rate"]), _fmt(s["p50_ms"]),
                            _fmt(s["p95_ms"]), _fmt(s["p99_ms"])])
    files.append("summary_table.csv")

    with open(report / "timeseries_latency.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "level", "phase", "success", "censored_latency_ms"])
        for t, lv, phase, success, lat in sorted(timeline):
            w.writerow([f"{t:.3f}", lv, phase,
                        "true" if success else "false", f"{lat:.2f}"])
    files.append("timeseries_latency.csv")

    if is_run and (base / "resources.csv").is_file():
        with open(base / "resources.csv", newline="", encoding="utf-8") as src, \
             open(report / "timeseries_cpu.csv", "w", newline="", encoding="utf-8") as dst:
            w = csv.writer(dst, lineterminator="\n")
            w.writerow(["t_s", "cpu_pct"])
            for row in csv.DictReader(src):
                w.writerow([row["t_s"], row["cpu_pct"]])
        files.append("timeseries_cpu.csv")

    for (lv, phase), samples in sorted(groups.items()):
        if not samples:
            continue
        series = cdf([s.censored_latency_ms for s in samples])
        name = f"cdf_{lv}_{phase}.csv"
        with open(report / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["latency_ms", "fraction"])
            for latency, fraction in series.points:
                w.writerow([f"{latency:.2f}", f"{fraction:.6f}"])
        files.append(name)

    if is_run and not (base / "features" / "native.csv").is_file():
        notes.append("flow sections omitted: no capture/features for this run")

    if svg and timeline:
        (report / "latency_timeline.svg").write_text(
            _latency_svg(sorted(timeline), boundaries), encoding="utf-8")
        files.append("latency_timeline.svg")

    index = {"files": sorted(files), "notes": notes}
    (report / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index


def _latency_svg(timeline, boundaries, width=800, height=300, pad=40):
    """Minimal deterministic SVG: censored latency vs time with phase
    boundary markers."""
    t_max = max(t for t, *_ in timeline) or 1.0
    y_max = max(lat for *_, lat in timeline) or 1.0

    def x(t):
        return pad + (width - 2 * pad) * t / t_max

    def y(v):
        return height - pad - (height - 2 * pad) * v / y_max

    points = " ".join(f"{x(t):.2f},{y(lat):.2f}" for t, _, _, _, lat in timeline)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1" points="{points}"/>',
    ]
    for b in boundaries:
        parts.append(f'<line x1="{x(b):.2f}" y1="{pad}" x2="{x(b):.2f}" '
                     f'y2="{height - pad}" stroke="#c04040" stroke-dasharray="4 3"/>')
    parts.append(f'<text x="{pad}" y="{height - 10}" font-size="11">time (s), '
                 f'max latency {y_max:.1f} ms</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
