"""Live packet capture to pcap and the extraction-track registry.

Capture uses an AF_PACKET raw socket bound to one interface, with a small
filter language (`tcp`, `udp`, `port N`, `host A.B.C.D`, combinable with
spaces meaning AND; empty filter = everything). Lack of privileges or a
missing interface downgrades the run to capture-disabled, it never aborts."""

from __future__ import annotations

import shlex
import subprocess
import threading
import time
from dataclasses import dataclass

from .errors import CapturePermissionDenied, CommandNotFound, InterfaceNotFound
from .flows import parse_packet
from .pcap import LINKTYPE_ETHERNET, PacketRecord, PcapWriter

try:
    import socket as _socket
    _HAS_AF_PACKET = hasattr(_socket, "AF_PACKET")
except ImportError:  # pragma: no cover
    _HAS_AF_PACKET = False


class CaptureFilter:
    """AND-combined predicates over parsed packets."""

    def __init__(self, text: str):
        self.text = (text or "").strip()
        self._protos = set()
        self._ports = set()
        self._hosts = set()
        tokens = self.text.split()
        i = 0
        while i < len(tokens):
            tok = tokens[i].lower()
            if tok in ("tcp", "udp"):
                self._protos.add(6 if tok == "tcp" else 17)
                i += 1
            elif tok == "port" and i + 1 < len(tokens):
                self._ports.add(int(tokens[i + 1]))
                i += 2
            elif tok == "host" and i + 1 < len(tokens):
                self._hosts.add(tokens[i + 1])
                i += 2
            elif tok == "and":
                i += 1
            else:
                raise ValueError(f"unsupported filter token: {tokens[i]!r}")

    def matches(self, data: bytes, linktype: int) -> bool:
        if not self.text:
            return True
        pkt = parse_packet(data, 0.0, linktype)
        if pkt is None:
            return False
        if self._protos and pkt.proto not in self._protos:
            return False
        if self._ports and pkt.sport not in self._ports and pkt.dport not in self._ports:
            return False
        if self._hosts and pkt.src not in self._hosts and pkt.dst not in self._hosts:
            return False
        return True


class CaptureHandle:
    def __init__(self, iface, path, filter_text):
        self.iface = iface
        self.path = path
        self.filter = CaptureFilter(filter_text)
        self.packet_count = 0
        self._stop = threading.Event()
        self._sock = None
        self._thread = None

    def _open_socket(self):
        if not _HAS_AF_PACKET:
            raise CapturePermissionDenied("AF_PACKET not available on this platform")
        try:
            sock = _socket.socket(_socket.AF_PACKET, _socket.SOCK_RAW,
                                  _socket.htons(0x0003))
        except PermissionError as exc:
            raise CapturePermissionDenied(str(exc))
        try:
            sock.bind((self.iface, 0))
        except OSError as exc:
            sock.close()
            raise InterfaceNotFound(f"{self.iface}: {exc}")
        sock.settimeout(0.2)
        return sock

    def start(self):
        self._sock = self._open_socket()
        self._writer = PcapWriter(self.path, linktype=LINKTYPE_ETHERNET)
        self._thread = threading.Thread(target=self._loop, name="nsb-capture",
                                        daemon=True)
        self._thread.start()
        return self

    def _loop(self):
        while not self._stop.is_set():
            try:
                data = self._sock.recv(65535)
            except TimeoutError:
                continue
            except OSError:
                break
            if not self.filter.matches(data, LINKTYPE_ETHERNET):
                continue
            now = time.time()
            sec = int(now)
            self._writer.write(PacketRecord(ts_sec=sec,
                                            ts_usec=int((now - sec) * 1e6),
                                            original_len=len(data), data=data))
            self.packet_count += 1

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        if self._sock is not None:
            self._sock.close()
        self._writer.close()
        return {"packet_count": self.packet_count}


def start_capture(iface, filter_text, path) -> CaptureHandle:
    return CaptureHandle(iface, path, filter_text).start()


def stop_capture(handle: CaptureHandle) -> dict:
    return handle.stop()


# --- extraction tracks --------------------------------------------------------


@dataclass(frozen=True)
class ExtractorTrack:
    """One independent feature extractor. The command template must contain
    {pcap} and {out} placeholders; the track writes features/<name>.csv."""

    name: str
    command_template: str

    def __post_init__(self):
        if "{pcap}" not in self.command_template or "{out}" not in self.command_template:
            raise ValueError("command template needs {pcap} and {out} placeholders")


def register_extractor_track(name: str, command_template: str) -> ExtractorTrack:
    return ExtractorTrack(name=name, command_template=command_template)


def run_track(track: ExtractorTrack, pcap_path, out_path, timeout=120) -> dict:
    """Run one external track; failure is recorded, never raised upward."""
    cmd = [part.format(pcap=str(pcap_path), out=str(out_path))
           for part in shlex.split(track.command_template)]
    try:
        proc = subprocess.run(cmd, capture_output=True, timeout=timeout)
    except FileNotFoundError as exc:
        return {"track": track.name, "status": "command_not_found",
                "error": str(CommandNotFound(str(exc)))}
    except subprocess.TimeoutExpired:
        return {"track": track.name, "status": "timeout"}
    if proc.returncode != 0:
        return {"track": track.name, "status": "failed",
                "exit_status": proc.returncode,
                "stderr": proc.stderr.decode("utf-8", "replace")[-2000:]}
    return {"track": track.name, "status": "ok", "exit_status": 0}
