import socket
import threading
import time

import pytest

from nsb.orchestrator import phase_schedule
from nsb.probe import (
    PROBES_HEADER,
    ProbeConfig,
    censor,
    probe_once,
    read_probes_csv,
    run_probe_loop,
)


class LocalServer:
    """Minimal TCP server with a pluggable per-connection behavior."""

    def __init__(self, behavior):
        self.behavior = behavior
        self.sock = socket.socket()
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(16)
        self.port = self.sock.getsockname()[1]
        self.requests = 0
        self._stop = False
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _loop(self):
        while not self._stop:
            try:
                self.sock.settimeout(0.2)
                conn, _ = self.sock.accept()
            except OSError:
                continue
            self.requests += 1
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn):
        try:
            self.behavior(conn)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def close(self):
        self._stop = True
        self.sock.close()
        self._thread.join(timeout=1)


def _respond(status_line):
    def behavior(conn):
        conn.settimeout(2)
        buf = b""
        while b"\r\n\r\n" not in buf:
            chunk = conn.recv(4096)
            if not chunk:
                return
            buf += chunk
        conn.sendall(f"HTTP/1.1 {status_line}\r\nContent-Length: 2\r\n"
                     f"Connection: close\r\n\r\nok".encode())
    return behavior


def _stall(conn):
    time.sleep(3)


@pytest.fixture
def ok_server():
    srv = LocalServer(_respond("200 OK"))
    yield srv
    srv.close()


def _cfg(port, protocol="http", timeout_s=2.0, interval_s=0.05):
    return ProbeConfig(protocol=protocol, host="127.0.0.1", port=port,
                       interval_s=interval_s, timeout_s=timeout_s)


def test_http_success(ok_server):
    raw = probe_once(_cfg(ok_server.port))
    assert raw.ok
    assert raw.error_kind is None
    assert 0 < raw.latency_ms < 500


def test_tcp_probe_measures_connect(ok_server):
    raw = probe_once(_cfg(ok_server.port, protocol="tcp"))
    assert raw.ok
    assert raw.latency_ms < 100


def test_refused():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    raw = probe_once(_cfg(port))
    assert not raw.ok
    assert raw.error_kind == "refused"
    assert raw.latency_ms is None


def test_timeout_is_a_value_not_an_exception():
    srv = LocalServer(_stall)
    try:
        start = time.perf_counter()
        raw = probe_once(_cfg(srv.port, timeout_s=0.3))
        elapsed = time.perf_counter() - start
    finally:
        srv.close()
    assert not raw.ok
    assert raw.error_kind == "timeout"
    assert elapsed < 1.5


def test_http_error_status_is_protocol_failure():
    srv = LocalServer(_respond("503 Service Unavailable"))
    try:
        raw = probe_once(_cfg(srv.port))
    finally:
        srv.close()
    assert not raw.ok
    assert raw.error_kind == "protocol"


def test_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(protocol="icmp", host="h", port=1)
    with pytest.raises(ValueError):
        ProbeConfig(protocol="http", host="h", port=1, interval_s=0)
    with pytest.raises(ValueError):
        ProbeConfig(protocol="http", host="h", port=1, timeout_s=-1)


# --- censoring -------------------------------------------------------------------


class _Raw:
    def __init__(self, ok, latency):
        self.ok = ok
        self.latency_ms = latency


def test_censor_rules():
    # a slow-but-successful sample keeps its measured latency
    assert censor(_Raw(True, 1275.74), 2000) == (True, 1275.74)
    assert censor(_Raw(True, 3.2), 2000) == (True, 3.2)
    # failures and over-threshold samples pin to the censor value
    assert censor(_Raw(False, None), 2000) == (False, 2000)
    assert censor(_Raw(True, 2500.0), 2000) == (False, 2000)
    assert censor(_Raw(True, 2000.0), 2000) == (True, 2000.0)


# --- the scheduled loop -------------------------------------------------------------


def test_probe_loop_counts_labels_and_csv(ok_server, tmp_path):
    windows = phase_schedule(0.3, 0.4, 0.3)
    out = tmp_path / "probes.csv"
    samples = run_probe_loop(_cfg(ok_server.port, interval_s=0.05), windows,
                             str(out))
    # 1.0 s / 50 ms = 20 scheduled samples
    assert abs(len(samples) - 20) <= 2
    ts = [s.t for s in samples]
    assert ts == sorted(ts)
    assert all(t2 > t1 for t1, t2 in zip(ts, ts[1:]))
    for s in samples:
        expected = ("warmup" if s.t < 0.3 else
                    "attack" if s.t < 0.7 else "cooldown")
        assert s.phase == expected
        assert s.success
        assert s.censored_latency_ms <= 2000.0

    assert out.read_text().splitlines()[0] == ",".join(PROBES_HEADER)
    back = read_probes_csv(out)
    assert len(back) == len(samples)
    assert [b.phase for b in back] == [s.phase for s in samples]
    assert all(abs(b.censored_latency_ms - s.censored_latency_ms) < 0.01
               for b, s in zip(back, samples))


def test_probe_loop_stop_event(ok_server, tmp_path):
    windows = phase_schedule(5, 10, 5)
    stop = threading.Event()
    result = {}

    def run():
        result["samples"] = run_probe_loop(
            _cfg(ok_server.port, interval_s=0.05), windows,
            str(tmp_path / "probes.csv"), stop_event=stop)

    t = threading.Thread(target=run)
    t.start()
    time.sleep(0.4)
    stop.set()
    t.join(timeout=5)
    assert not t.is_alive()
    assert 2 <= len(result["samples"]) < 30


def test_probe_loop_failures_are_censored(tmp_path):
    srv = LocalServer(_respond("503 Service Unavailable"))
    try:
        windows = phase_schedule(0.1, 0.2, 0.1)
        samples = run_probe_loop(_cfg(srv.port, interval_s=0.05), windows,
                                 str(tmp_path / "probes.csv"))
    finally:
        srv.close()
    assert samples
    for s in samples:
        assert not s.success
        assert s.latency_ms is None
        assert s.censored_latency_ms == 2000.0
        assert s.error_kind == "protocol"
