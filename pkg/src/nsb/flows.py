"""Native flow feature extraction over captured pcaps.

Bidirectional 5-tuple flows: both directions of a conversation map to one
canonical key; forward is the direction of the first observed packet. Only
IPv4 TCP/UDP is aggregated; everything else is counted and skipped.
"""

from __future__ import annotations

import csv
import statistics
import struct
from dataclasses import dataclass

from .pcap import LINKTYPE_ETHERNET, LINKTYPE_NULL, read_pcap

NATIVE_HEADER = [
    "proto", "addr_lo", "port_lo", "addr_hi", "port_hi",
    "first_ts", "last_ts", "duration_s",
    "fwd_packets", "bwd_packets", "fwd_bytes", "bwd_bytes",
    "syn_count", "fin_count", "rst_count", "ack_count",
    "iat_mean_ms", "iat_std_ms",
    "cell_id", "attack_id", "level", "phase",
]

TCP = 6
UDP = 17


@dataclass(frozen=True)
class ParsedPacket:
    ts: float
    proto: int
    src: str
    sport: int
    dst: str
    dport: int
    length: int      # IP total length
    tcp_flags: int   # 0 for UDP


def _ipv4_addr(raw: bytes) -> str:
    return ".".join(str(b) for b in raw)


def parse_packet(data: bytes, ts: float, linktype: int):
    """Parse one link-layer frame into a ParsedPacket, or None if it is not
    an IPv4 TCP/UDP packet we aggregate."""
    if linktype == LINKTYPE_ETHERNET:
        if len(data) < 14:
            return None
        ethertype = struct.unpack("!H", data[12:14])[0]
        if ethertype != 0x0800:
            return None
        ip = data[14:]
    elif linktype == LINKTYPE_NULL:
        if len(data) < 4:
            return None
        # family word is host byte order; accept AF_INET either way
        fam_le = struct.unpack("<I", data[:4])[0]
        fam_be = struct.unpack(">I", data[:4])[0]
        if 2 not in (fam_le, fam_be):
            return None
        ip = data[4:]
    else:
        return None

    if len(ip) < 20 or (ip[0] >> 4) != 4:
        return None
    ihl = (ip[0] & 0x0F) * 4
    if ihl < 20 or len(ip) < ihl:
        return None
    total_len = struct.unpack("!H", ip[2:4])[0]
    proto = ip[9]
    if proto not in (TCP, UDP):
        return None
    l4 = ip[ihl:]
    if proto == TCP:
        if len(l4) < 14:
            return None
        sport, dport = struct.unpack("!HH", l4[:4])
        flags = l4[13]
    else:
        if len(l4) < 4:
            return None
        sport, dport = struct.unpack("!HH", l4[:4])
        flags = 0
    return ParsedPacket(ts=ts, proto=proto,
                        src=_ipv4_addr(ip[12:16]), sport=sport,
                        dst=_ipv4_addr(ip[16:20]), dport=dport,
                        length=total_len, tcp_flags=flags)


def flow_key(pkt: ParsedPacket):
    """Canonical bidirectional key: (addr, port) endpoints sorted."""
    a = (pkt.src, pkt.sport)
    b = (pkt.dst, pkt.dport)
    lo, hi = (a, b) if a <= b else (b, a)
    return (pkt.proto, lo[0], lo[1], hi[0], hi[1])


class _FlowAccumulator:
    __slots__ = ("key", "first_src", "first_ts", "last_ts", "fwd_packets",
                 "bwd_packets", "fwd_bytes", "bwd_bytes", "syn", "fin", "rst",
                 "ack", "timestamps")

    def __init__(self, pkt: ParsedPacket):
        self.key = flow_key(pkt)
        self.first_src = (pkt.src, pkt.sport)
        self.first_ts = pkt.ts
        self.last_ts = pkt.ts
        self.fwd_packets = self.bwd_packets = 0
        self.fwd_bytes = self.bwd_bytes = 0
        self.syn = self.fin = self.rst = self.ack = 0
        self.timestamps = []

    def add(self, pkt: ParsedPacket):
        self.last_ts = max(self.last_ts, pkt.ts)
        self.timestamps.append(pkt.ts)
        if (pkt.src, pkt.sport) == self.first_src:
            self.fwd_packets += 1
            self.fwd_bytes += pkt.length
        else:
            self.bwd_packets += 1
            self.bwd_bytes += pkt.length
        if pkt.proto == TCP:
            self.syn += (pkt.tcp_flags >> 1) & 1
            self.fin += pkt.tcp_flags & 1
            self.rst += (pkt.tcp_flags >> 2) & 1
            self.ack += (pkt.tcp_flags >> 4) & 1


@dataclass(frozen=True)
class FlowRecord:
    proto: int
    addr_lo: str
    port_lo: int
    addr_hi: str
    port_hi: int
    first_ts: float
    last_ts: float
    fwd_packets: int
    bwd_packets: int
    fwd_bytes: int
    bwd_bytes: int
    syn_count: int
    fin_count: int
    rst_count: int
    ack_count: int
    iat_mean_ms: float | None
    iat_std_ms: float | None
    cell_id: str = ""
    attack_id: str = ""
    level: str = ""
    phase: str = ""

    @property
    def duration_s(self) -> float:
        return self.last_ts - self.first_ts

    def row(self) -> list:
        def ms(v):
            return "" if v is None else f"{v:.3f}"
        return [
            self.proto, self.addr_lo, self.port_lo, self.addr_hi, self.port_hi,
            f"{self.first_ts:.6f}", f"{self.last_ts:.6f}", f"{self.duration_s:.6f}",
            self.fwd_packets, self.bwd_packets, self.fwd_bytes, self.bwd_bytes,
            self.syn_count, self.fin_count, self.rst_count, self.ack_count,
            ms(self.iat_mean_ms), ms(self.iat_std_ms),
            self.cell_id, self.attack_id, self.level, self.phase,
        ]


def _iat_stats(timestamps):
    if len(timestamps) < 2:
        return None, None
    ts = sorted(timestamps)
    gaps_ms = [(b - a) * 1000.0 for a, b in zip(ts, ts[1:])]
    mean = statistics.fmean(gaps_ms)
    std = statistics.pstdev(gaps_ms) if len(gaps_ms) > 1 else 0.0
    return mean, std


def extract_flows(pcap_path, labels=None):
    """Aggregate a pcap into FlowRecords.

    Returns (flows, skipped_packets): flows ordered by first appearance,
    skipped_packets = count of non-IPv4-TCP/UDP packets."""
    labels = labels or {}
    records, linktype = read_pcap(pcap_path)
    flows: dict = {}
    skipped = 0
    for rec in records:
        pkt = parse_packet(rec.data, rec.timestamp, linktype)
        if pkt is None:
            skipped += 1
            continue
        key = flow_key(pkt)
        acc = flows.get(key)
        if acc is None:
            acc = flows[key] = _FlowAccumulator(pkt)
        acc.add(pkt)

    out = []
    for acc in flows.values():
        proto, addr_lo, port_lo, addr_hi, port_hi = acc.key
        iat_mean, iat_std = _iat_stats(acc.timestamps)
        out.append(FlowRecord(
            proto=proto, addr_lo=addr_lo, port_lo=port_lo,
            addr_hi=addr_hi, port_hi=port_hi,
            first_ts=acc.first_ts, last_ts=acc.last_ts,
            fwd_packets=acc.fwd_packets, bwd_packets=acc.bwd_packets,
            fwd_bytes=acc.fwd_bytes, bwd_bytes=acc.bwd_bytes,
            syn_count=acc.syn, fin_count=acc.fin, rst_count=acc.rst,
            ack_count=acc.ack, iat_mean_ms=iat_mean, iat_std_ms=iat_std,
            cell_id=labels.get("cell_id", ""), attack_id=labels.get("attack_id", ""),
            level=labels.get("level", ""), phase=labels.get("phase", ""),
        ))
    return out, skipped


def write_flow_csv(path, flows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NATIVE_HEADER)
        for f in flows:
            writer.writerow(f.row())
