"""Availability/latency probing with censoring and phase labels.

Probes run on a fixed-rate schedule: sample i targets t0 + i*interval even if
an earlier probe is still in flight (up to a cap), so per-phase sample counts
stay stable when the target slows down. Every HTTP probe uses a fresh
connection; latency runs from request start to response completion."""

from __future__ import annotations

import csv
import os
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

PROBES_HEADER = ["t_s", "phase", "success", "latency_ms",
                 "censored_latency_ms", "error_kind"]

MAX_IN_FLIGHT = 64


@dataclass(frozen=True)
class ProbeConfig:
    protocol: str            # http or tcp
    host: str
    port: int
    path: str = "/"
    interval_s: float = 0.1
    timeout_s: float = 2.0

    def __post_init__(self):
        if self.interval_s <= 0 or self.timeout_s <= 0:
            raise ValueError("interval and timeout must be > 0")
        if self.protocol not in ("http", "tcp"):
            raise ValueError(f"unsupported probe protocol: {self.protocol}")


@dataclass(frozen=True)
class RawResult:
    ok: bool
    latency_ms: float | None
    error_kind: str | None   # timeout | refused | reset | protocol


@dataclass(frozen=True)
class ProbeSample:
    t: float
    phase: str
    success: bool
    latency_ms: float | None
    censored_latency_ms: float
    error_kind: str | None

    def row(self) -> list:
        return [
            f"{self.t:.3f}",
            self.phase,
            "true" if self.success else "false",
            "" if self.latency_ms is None else f"{self.latency_ms:.2f}",
            f"{self.censored_latency_ms:.2f}",
            self.error_kind or "",
        ]


def _read_http_response(sock: socket.socket, deadline: float) -> RawResult:
    """Read to EOF (the bundled services close after responding) and judge the
    status line; any 2xx/3xx complete response is a success."""
    chunks = []
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return RawResult(False, None, "timeout")
        sock.settimeout(remaining)
        try:
            chunk = sock.recv(65536)
        except (TimeoutError, socket.timeout):
            return RawResult(False, None, "timeout")
        except ConnectionResetError:
            return RawResult(False, None, "reset")
        except OSError:
            return RawResult(False, None, "reset")
        if not chunk:
            break
        chunks.append(chunk)
    raw = b"".join(chunks)
    line, _, _ = raw.partition(b"\r\n")
    parts = line.split(None, 2)
    if len(parts) < 2 or not parts[0].startswith(b"HTTP/"):
        return RawResult(False, None, "protocol")
    try:
        status = int(parts[1])
    except ValueError:
        return RawResult(False, None, "protocol")
    if 200 <= status < 400:
        return RawResult(True, None, None)
    return RawResult(False, None, "protocol")


def probe_once(config: ProbeConfig) -> RawResult:
    """One probe. All failures come back as values, never exceptions."""
    start = time.perf_counter()
    deadline = start + config.timeout_s
    try:
        sock = socket.create_connection((config.host, config.port),
                                        timeout=config.timeout_s)
    except ConnectionRefusedError:
        return RawResult(False, None, "refused")
    except (TimeoutError, socket.timeout):
        return RawResult(False, None, "timeout")
    except OSError:
        return RawResult(False, None, "refused")

    try:
        if config.protocol == "tcp":
            latency_ms = (time.perf_counter() - start) * 1000.0
            return RawResult(True, latency_ms, None)
        request = (f"GET {config.path} HTTP/1.1\r\n"
                   f"Host: {config.host}:{config.port}\r\n"
                   f"Connection: close\r\n\r\n").encode("ascii")
        try:
            sock.sendall(request)
        except (ConnectionResetError, BrokenPipeError):
            return RawResult(False, None, "reset")
        result = _read_http_response(sock, deadline)
        if not result.ok:
            return result
        latency_ms = (time.perf_counter() - start) * 1000.0
        return RawResult(True, latency_ms, None)
    finally:
        try:
            sock.close()
        except OSError:
            pass


def censor(raw: RawResult, timeout_ms: float):
    """(success, censored_latency_ms): successes at or under the threshold
    keep their latency, everything else is pinned to the threshold."""
    if raw.ok and raw.latency_ms is not None and raw.latency_ms <= timeout_ms:
        return True, raw.latency_ms
    return False, timeout_ms


class _OrderedCsvWriter:
    """Writes samples in launch order as soon as the prefix is complete."""

    def __init__(self, path, timeout_ms):
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(PROBES_HEADER)
        self._timeout_ms = timeout_ms
        self._pending = {}
        self._next = 0
        self._lock = threading.Lock()
        self.samples = []

    def put(self, index: int, sample: ProbeSample):
        with self._lock:
            self._pending[index] = sample
            while self._next in self._pending:
                s = self._pending.pop(self._next)
                # hard invariant on every written row
                assert s.censored_latency_ms <= self._timeout_ms + 1e-9
                self._csv.writerow(s.row())
                self.samples.append(s)
                self._next += 1
            self._fh.flush()

    def close(self):
        self._fh.close()


def run_probe_loop(config: ProbeConfig, windows, out_path, t0=None,
                   stop_event: threading.Event | None = None):
    """Probe until the end of the last window, labeling each sample by its
    launch time. Returns the samples written to out_path."""
    from .orchestrator import label_phase

    if t0 is None:
        t0 = time.perf_counter()
    total = max(w.end for w in windows)
    stop_event = stop_event or threading.Event()
    timeout_ms = config.timeout_s * 1000.0
    writer = _OrderedCsvWriter(out_path, timeout_ms)
    gate = threading.Semaphore(MAX_IN_FLIGHT)

    def one(index: int, t_launch: float, phase: str):
        try:
            raw = probe_once(config)
            success, censored = censor(raw, timeout_ms)
            writer.put(index, ProbeSample(
                t=t_launch, phase=phase, success=success,
                latency_ms=raw.latency_ms if success else None,
                censored_latency_ms=censored,
                error_kind=None if success else (raw.error_kind or "timeout"),
            ))
        finally:
            gate.release()

    def boost_worker():
        # Measured latency must reflect the target, not scheduler contention
        # on a busy host: let probe threads preempt ambient load when the
        # process has the privilege to do so.
        try:
            os.setpriority(os.PRIO_PROCESS, threading.get_native_id(), -5)
        except OSError:
            pass

    pool = ThreadPoolExecutor(max_workers=MAX_IN_FLIGHT,
                              thread_name_prefix="nsb-probe",
                              initializer=boost_worker)
    i = 0
    try:
        while not stop_event.is_set():
            target = i * config.interval_s
            if target >= total:
                break
            delay = t0 + target - time.perf_counter()
            if delay > 0 and stop_event.wait(delay):
                break
            t_launch = time.perf_counter() - t0
            if t_launch >= total:
                break
            phase = label_phase(t_launch, windows)
            if phase is None:
                break
            gate.acquire()
            pool.submit(one, i, t_launch, phase)
            i += 1
    finally:
        # await in-flight probes; each is bounded by the probe timeout
        pool.shutdown(wait=True)
        writer.close()
    return writer.samples


def read_probes_csv(path):
    """Load probes.csv back into ProbeSample objects."""
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            lat = row["latency_ms"]
            samples.append(ProbeSample(
                t=float(row["t_s"]),
                phase=row["phase"],
                success=row["success"] == "true",
                latency_ms=float(lat) if lat else None,
                censored_latency_ms=float(row["censored_latency_ms"]),
                error_kind=row["error_kind"] or None,
            ))
    return samples
