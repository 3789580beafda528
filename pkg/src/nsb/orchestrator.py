"""Cell execution: the warmup -> attack -> cooldown lifecycle.

One cell at a time. Within a cell the lifecycle timer is the sole issuer of
start/stop commands; the probe loop, resource sampler, and capture writer run
concurrently and each own their output file. Everything the run produces is
inventoried with SHA-256 digests in meta.json, written last. Aborted runs
keep their partial artifacts."""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import platform
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .capture import run_track, start_capture, stop_capture
from .catalog import Catalog
from .errors import CaptureError, NsbError
from .flows import extract_flows, write_flow_csv
from .planner import ExecutionMatrix, MatrixCell
from .probe import ProbeConfig, run_probe_loop
from .runtime.base import RESOURCES_HEADER, WorkloadSpec
from .util import sha256_file

MANIFEST_NAME = "meta.json"
MANIFEST_SCHEMA = 1

PHASE_NAMES = ("warmup", "attack", "cooldown")


@dataclass(frozen=True)
class PhaseWindow:
    phase: str
    start: float  # inclusive, seconds relative to t0
    end: float    # exclusive


def phase_schedule(warmup_s, attack_s, cooldown_s):
    """Three contiguous half-open windows starting at 0."""
    for name, dur in zip(PHASE_NAMES, (warmup_s, attack_s, cooldown_s)):
        if dur <= 0:
            raise ValueError(f"non-positive {name} duration: {dur}")
    return [
        PhaseWindow("warmup", 0.0, warmup_s),
        PhaseWindow("attack", warmup_s, warmup_s + attack_s),
        PhaseWindow("cooldown", warmup_s + attack_s, warmup_s + attack_s + cooldown_s),
    ]


def label_phase(t, windows):
    """Phase containing t (start-inclusive, end-exclusive), or None when t
    falls outside every window."""
    for w in windows:
        if w.start <= t < w.end:
            return w.phase
    return None


@dataclass
class RunManifest:
    cell_id: str
    service_id: str
    attack_id: str
    level: str
    repetition: int
    params: dict
    catalog_digest: str
    spec_digest: str
    adapter: str
    t0_wall: float
    phases: list
    timing: dict
    artifacts: dict
    outcome: dict
    notes: list
    tool_versions: dict
    command: dict
    schema_version: int = MANIFEST_SCHEMA

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, run_dir):
        path = Path(run_dir) / MANIFEST_NAME
        data = json.loads(path.read_text(encoding="utf-8"))
        data.pop("schema_version", None)
        manifest = cls(**data, schema_version=MANIFEST_SCHEMA)
        manifest.run_dir = str(run_dir)
        return manifest


def _run_dir_for(out_root: Path, cell: MatrixCell) -> Path:
    stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y%m%dT%H%M%S")
    base = f"{stamp}_{cell.cell_id.replace('/', '-')}"
    candidate = out_root / base
    counter = 1
    while candidate.exists():
        counter += 1
        candidate = out_root / f"{base}-{counter}"
    candidate.mkdir(parents=True)
    return candidate


def _inventory(run_dir: Path) -> dict:
    out = {}
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            rel = str(p.relative_to(run_dir))
            out[rel] = {"bytes": p.stat().st_size, "sha256": sha256_file(p)}
    return out


class _ResourceSampler(threading.Thread):
    """Periodic resource telemetry for the target workload."""

    def __init__(self, adapter, handle, out_path, t0, interval_s=0.25):
        super().__init__(name="nsb-sampler", daemon=True)
        self.adapter = adapter
        self.handle = handle
        self.out_path = out_path
        self.t0 = t0
        self.interval_s = interval_s
        self.stop_event = threading.Event()

    def run(self):
        with open(self.out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESOURCES_HEADER)
            i = 0
            while not self.stop_event.is_set():
                deadline = self.t0 + i * self.interval_s
                wait = deadline - time.perf_counter()
                if wait > 0 and self.stop_event.wait(wait):
                    break
                try:
                    sample = self.adapter.sample_resources(self.handle)
                except NsbError:
                    break
                sample = dataclasses.replace(sample,
                                             t=time.perf_counter() - self.t0)
                writer.writerow(sample.row())
                fh.flush()
                i += 1


def execute_cell(cell: MatrixCell, catalog: Catalog, adapter, out_root,
                 instrumentation, spec_digest="", baseline=None,
                 command=None) -> RunManifest:
    """Run one matrix cell end to end and return its manifest. Errors mark
    the run aborted; partial artifacts are kept and inventoried."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    run_dir = _run_dir_for(out_root, cell)

    service = catalog.services[cell.service_id]
    attack = catalog.attacks[cell.attack_id]
    windows = phase_schedule(cell.warmup_s, cell.attack_s, cell.cooldown_s)

    manifest = RunManifest(
        cell_id=cell.cell_id,
        service_id=cell.service_id,
        attack_id=cell.attack_id,
        level=cell.level.label,
        repetition=cell.repetition,
        params=dict(cell.params),
        catalog_digest=catalog.source_digest,
        spec_digest=spec_digest,
        adapter=adapter.name,
        t0_wall=0.0,
        phases=[dataclasses.asdict(w) for w in windows],
        timing={},
        artifacts={},
        outcome={"status": "completed"},
        notes=[],
        tool_versions={"nsb": __version__, "python": platform.python_version()},
        command=command or {},
    )

    handles = []
    capture_handle = None
    sampler = None
    probe_thread = None
    probe_stop = threading.Event()
    probe_result = {}
    try:
        target_cmd = service.image_ref
        if service.protocol == "http" and "--port" not in target_cmd:
            target_cmd += f" --port {service.port}"
        if service.capacity_limit and "--capacity" not in target_cmd:
            target_cmd += f" --capacity {service.capacity_limit}"
        target = adapter.start_workload(WorkloadSpec(
            name=f"{cell.cell_id.replace('/', '-')}-target",
            image_ref=target_cmd,
            role="target",
            published_port=service.port,
            readiness_path=service.readiness.path,
            readiness_timeout_s=service.readiness.timeout_s,
            protocol=service.protocol,
            log_path=str(run_dir / "target.log"),
        ))
        handles.append(target)

        if baseline is not None:
            profile = catalog.benign[baseline]
            handles.append(adapter.start_workload(WorkloadSpec(
                name=f"{cell.cell_id.replace('/', '-')}-benign",
                image_ref="nsb-benign-client",
                role="benign",
                env={
                    "NSB_TARGET": target.address,
                    "NSB_CLIENTS": str(profile.client_count),
                    "NSB_INTERARRIVAL": f"{profile.interarrival_s:g}",
                },
                log_path=str(run_dir / "benign.log"),
            )))

        attacker = adapter.start_workload(WorkloadSpec(
            name=f"{cell.cell_id.replace('/', '-')}-attacker",
            image_ref=attack.image_ref,
            role="attacker",
            hook=attack.hook,
            env={"NSB_TARGET": target.address},
            log_path=str(run_dir / "attacker.log"),
        ))
        handles.append(attacker)

        if instrumentation.capture:
            try:
                capture_handle = start_capture(
                    instrumentation.capture_iface,
                    instrumentation.capture_filter,
                    str(run_dir / "capture.pcap"),
                )
            except CaptureError as exc:
                manifest.notes.append(f"capture_skipped: {exc}")
                (run_dir / "capture.pcap").unlink(missing_ok=True)

        host, port = target.address.rsplit(":", 1)
        probe_cfg = ProbeConfig(
            protocol=instrumentation.probe.protocol,
            host=host, port=int(port),
            path=instrumentation.probe.path,
            interval_s=instrumentation.probe.interval_s,
            timeout_s=instrumentation.probe.timeout_s,
        )

        # phase clock starts here; wall clock recorded for metadata only
        t0 = time.perf_counter()
        manifest.t0_wall = time.time()

        sampler = _ResourceSampler(adapter, target,
                                   str(run_dir / "resources.csv"), t0)
        sampler.start()

        def probe_thread_fn():
            try:
                probe_result["samples"] = run_probe_loop(
                    probe_cfg, windows, str(run_dir / "probes.csv"),
                    t0=t0, stop_event=probe_stop)
            except Exception as exc:  # evidence-write failure aborts the run
                probe_result["error"] = exc

        probe_thread = threading.Thread(target=probe_thread_fn,
                                        name="nsb-probe-loop", daemon=True)
        probe_thread.start()

        attack_window = windows[1]
        _sleep_until(t0 + attack_window.start)
        hook = adapter.exec_hook(attacker, attack.hook, cell.params)
        manifest.timing["hook_started_at_s"] = hook.started_at - t0

        _sleep_until(t0 + attack_window.end)
        adapter.stop_workload(attacker, grace_s=0.5)
        manifest.timing["attacker_stopped_at_s"] = time.perf_counter() - t0
        manifest.timing.update(adapter.hook_status(attacker))

        _sleep_until(t0 + windows[-1].end)
        probe_thread.join(timeout=instrumentation.probe.timeout_s + 5)
        probe_stop.set()
        sampler.stop_event.set()
        sampler.join(timeout=2)
        if capture_handle is not None:
            stats = stop_capture(capture_handle)
            manifest.timing["capture_packets"] = stats["packet_count"]
            capture_handle = None
        if "error" in probe_result:
            raise probe_result["error"]

        for handle in list(handles):
            adapter.stop_workload(handle)
        handles.clear()

        pcap_path = run_dir / "capture.pcap"
        if instrumentation.extract_features and pcap_path.exists():
            _extract(run_dir, pcap_path, cell, manifest, windows,
                     instrumentation.extra_tracks)

    except NsbError as exc:
        manifest.outcome = {"status": "aborted",
                            "reason": f"{type(exc).__name__}: {exc}"}
    except Exception as exc:
        manifest.outcome = {"status": "aborted",
                            "reason": f"unexpected {type(exc).__name__}: {exc}"}
    finally:
        if probe_thread is not None and probe_thread.is_alive():
            probe_stop.set()
            probe_thread.join(timeout=instrumentation.probe.timeout_s + 5)
        if sampler is not None:
            sampler.stop_event.set()
            sampler.join(timeout=2)
        if capture_handle is not None:
            try:
                stop_capture(capture_handle)
            except Exception:
                pass
        for handle in handles:
            try:
                adapter.stop_workload(handle, grace_s=0.5)
            except Exception:
                pass

    manifest.artifacts = _inventory(run_dir)
    (run_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    manifest.run_dir = str(run_dir)  # in-process convenience, not persisted
    return manifest


def _sleep_until(deadline):
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return
        time.sleep(min(remaining, 0.05))


def _extract(run_dir: Path, pcap_path: Path, cell: MatrixCell,
             manifest: RunManifest, windows, extra_tracks):
    features = run_dir / "features"
    features.mkdir(exist_ok=True)
    track_report = []
    try:
        flows, skipped = extract_flows(str(pcap_path), labels={
            "cell_id": cell.cell_id, "attack_id": cell.attack_id,
            "level": cell.level.label,
        })
        labeled = []
        for flow in flows:
            phase = label_phase(flow.first_ts - manifest.t0_wall, windows) or ""
            labeled.append(dataclasses.replace(flow, phase=phase))
        write_flow_csv(str(features / "native.csv"), labeled)
        track_report.append({"track": "native", "status": "ok",
                             "flows": len(labeled), "skipped_packets": skipped})
    except CaptureError as exc:
        track_report.append({"track": "native", "status": "failed",
                             "error": str(exc)})
    for track in extra_tracks:
        out = features / f"{track.name}.csv"
        track_report.append(run_track(track, pcap_path, out))
    (features / "tracks.json").write_text(
        json.dumps(track_report, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def execute_matrix(matrix: ExecutionMatrix, catalog: Catalog, adapter,
                   out_root, instrumentation, baseline=None, command=None):
    """Execute cells strictly sequentially; an aborted cell never stops the
    matrix."""
    manifests = []
    for cell in matrix.cells:
        manifests.append(execute_cell(
            cell, catalog, adapter, out_root, instrumentation,
            spec_digest=matrix.spec_digest, baseline=baseline,
            command=command))
    return manifests
