"""Bundled desk-scale workloads, each runnable as `python -m nsb.workloads
<name>`:

  nsb-http-target   threaded HTTP server with a concurrent-request cap
                    (--capacity) and per-request service delay (--delay-ms);
                    requests beyond capacity wait in a bounded queue, overflow
                    is answered 503 immediately
  nsb-http-flood    closed-loop HTTP request flood (NSB_RATE, 0 = no pacing;
                    unpaced mode also pins server slots with slow requests)
  nsb-conn-flood    TCP connect flood, the stand-in for a raw SYN flood
  nsb-benign-client paced HTTP clients (NSB_CLIENTS/NSB_INTERARRIVAL)
  nsb-idle          inert supervisor process used as the attacker shell

Hook parameters arrive as NSB_<NAME> environment variables; the target
address as NSB_TARGET=host:port.
"""

from __future__ import annotations

import argparse
import os
import queue
import socket
import sys
import threading
import time


def _env(name, default=None):
    return os.environ.get(f"NSB_{name}", default)


def _target_address():
    raw = _env("TARGET")
    if not raw:
        raise SystemExit("NSB_TARGET is not set")
    host, _, port = raw.rpartition(":")
    return host, int(port)


def _deadline_from_env():
    raw = _env("DURATION")
    if raw is None:
        return None
    return time.monotonic() + float(raw)


def _expired(deadline):
    return deadline is not None and time.monotonic() >= deadline


# --- target -------------------------------------------------------------------

_RESPONSE_OK = (b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\n"
                b"Connection: close\r\n\r\nok")
_RESPONSE_BUSY = (b"HTTP/1.1 503 Service Unavailable\r\nContent-Length: 4\r\n"
                  b"Connection: close\r\n\r\nbusy")


def _read_request(conn, timeout=5.0):
    conn.settimeout(timeout)
    buf = b""
    while b"\r\n\r\n" not in buf:
        chunk = conn.recv(4096)
        if not chunk:
            return None
        buf += chunk
        if len(buf) > 65536:
            return None
    return buf


def http_target(argv):
    ap = argparse.ArgumentParser(prog="nsb-http-target")
    ap.add_argument("--port", type=int, required=True)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--capacity", type=int, default=0,
                    help="max requests served concurrently (0 = uncapped)")
    ap.add_argument("--delay-ms", type=float, default=0.0)
    ap.add_argument("--queue-limit", type=int, default=0,
                    help="waiting-room size before 503 (default = capacity)")
    ap.add_argument("--backlog", type=int, default=64)
    args = ap.parse_args(argv)

    # The target is the thing being measured: on a busy host it should lose
    # CPU to nothing but the kernel, or probe latency measures the scheduler.
    # Needs privilege; silently skipped without it.
    try:
        os.nice(-5)
    except OSError:
        pass

    workers = args.capacity if args.capacity > 0 else 16
    queue_limit = args.queue_limit or workers
    pending = queue.Queue(maxsize=queue_limit if args.capacity > 0 else 0)
    delay_s = args.delay_ms / 1000.0

    def handle(conn):
        try:
            if _read_request(conn) is None:
                return
            if delay_s:
                time.sleep(delay_s)
            conn.sendall(_RESPONSE_OK)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def worker():
        while True:
            conn = pending.get()
            handle(conn)

    for _ in range(workers):
        threading.Thread(target=worker, daemon=True).start()

    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((args.host, args.port))
    srv.listen(args.backlog)
    while True:
        try:
            conn, _addr = srv.accept()
        except OSError:
            break
        try:
            pending.put_nowait(conn)
        except queue.Full:
            try:
                conn.sendall(_RESPONSE_BUSY)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass


# --- attackers ------------------------------------------------------------------


def _http_request_once(host, port, path="/", connect_timeout=0.25,
                       io_timeout=2.0):
    try:
        sock = socket.create_connection((host, port), timeout=connect_timeout)
    except OSError:
        return False
    try:
        sock.settimeout(io_timeout)
        sock.sendall(f"GET {path} HTTP/1.1\r\nHost: {host}\r\n"
                     f"Connection: close\r\n\r\n".encode("ascii"))
        while sock.recv(65536):
            pass
        return True
    except OSError:
        return False
    finally:
        try:
            sock.close()
        except OSError:
            pass


def _http_hold_once(host, port, hold_s, connect_timeout=0.25):
    """Open a connection, send an incomplete request and sit on it. Pins one
    server slot for up to hold_s; the slot frees as soon as we are killed."""
    try:
        sock = socket.create_connection((host, port), timeout=connect_timeout)
    except OSError:
        return False
    try:
        sock.sendall(b"GET / HTTP/1.1\r\nHost: flood\r\n")
        time.sleep(hold_s)
        return True
    except OSError:
        return False
    finally:
        try:
            sock.close()
        except OSError:
            pass


def _run_flood(shoot, rate, deadline, unlimited_workers=64):
    """Drive `shoot` at `rate` per second, or flat out when rate <= 0."""
    # Load generators must never starve the harness or the probe clients of
    # CPU, or the measurements describe scheduler contention instead of the
    # target. Flood threads spend most of their time blocked in connect()
    # anyway, so deprioritizing them costs little offered load.
    try:
        os.nice(10)
    except OSError:
        pass
    if rate <= 0:
        stop = threading.Event()

        def worker():
            while not stop.is_set():
                shoot()

        threads = [threading.Thread(target=worker, daemon=True)
                   for _ in range(unlimited_workers)]
        for t in threads:
            t.start()
        while not _expired(deadline):
            time.sleep(0.05)
        stop.set()
        return

    workers = max(1, min(16, int(rate) // 50 or 1))
    per_worker = rate / workers

    def paced_worker():
        start = time.monotonic()
        i = 0
        while not _expired(deadline):
            target = start + i / per_worker
            now = time.monotonic()
            if target > now:
                time.sleep(target - now)
            shoot()
            i += 1

    threads = [threading.Thread(target=paced_worker, daemon=True)
               for _ in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def http_flood(argv):
    ap = argparse.ArgumentParser(prog="nsb-http-flood")
    ap.add_argument("--path", default="/")
    ap.add_argument("--workers", type=int,
                    default=int(_env("WORKERS", "64")))
    ap.add_argument("--hold-ms", type=float, default=1000.0,
                    help="slow-request hold in unpaced mode (0 disables)")
    args = ap.parse_args(argv)
    host, port = _target_address()
    rate = float(_env("RATE", "0"))
    deadline = _deadline_from_env()
    hold_s = args.hold_ms / 1000.0

    def request_once():
        return _http_request_once(host, port, args.path)

    if rate <= 0 and hold_s > 0:
        # Flat-out mode alternates fast requests with slow-request holds:
        # the holds keep the target's workers and waiting room occupied, the
        # fast requests keep churning against the resulting 503s.
        def shoot():
            for _ in range(8):
                request_once()
            _http_hold_once(host, port, hold_s)
    else:
        shoot = request_once
    _run_flood(shoot, rate, deadline, unlimited_workers=args.workers)


def conn_flood(argv):
    ap = argparse.ArgumentParser(prog="nsb-conn-flood")
    ap.add_argument("--workers", type=int,
                    default=int(_env("WORKERS", "64")))
    args = ap.parse_args(argv)
    host, port = _target_address()
    rate = float(_env("RATE", "0"))
    deadline = _deadline_from_env()

    def connect_once():
        try:
            sock = socket.create_connection((host, port), timeout=0.25)
            sock.close()
        except OSError:
            pass

    _run_flood(connect_once, rate, deadline, unlimited_workers=args.workers)


# --- benign client ----------------------------------------------------------------


def benign_client(argv):
    ap = argparse.ArgumentParser(prog="nsb-benign-client")
    ap.add_argument("--path", default="/")
    args = ap.parse_args(argv)
    host, port = _target_address()
    clients = int(_env("CLIENTS", "1"))
    interarrival = float(_env("INTERARRIVAL", "1.0"))
    deadline = _deadline_from_env()

    def client():
        while not _expired(deadline):
            _http_request_once(host, port, args.path, connect_timeout=2.0)
            time.sleep(interarrival)

    threads = [threading.Thread(target=client, daemon=True)
               for _ in range(clients)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def idle(argv):
    while True:
        time.sleep(3600)


WORKLOADS = {
    "nsb-http-target": http_target,
    "nsb-http-flood": http_flood,
    "nsb-conn-flood": conn_flood,
    "nsb-benign-client": benign_client,
    "nsb-idle": idle,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in WORKLOADS:
        names = ", ".join(sorted(WORKLOADS))
        print(f"usage: python -m nsb.workloads <{names}> [args]", file=sys.stderr)
        return 2
    WORKLOADS[argv[0]](argv[1:])
    return 0


if __name__ == "__main__":
    sys.exit(main())
