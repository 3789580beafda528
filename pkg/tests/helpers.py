"""Shared builders for the test suite: raw packets, pcap files, throwaway
catalogs, and local sockets."""

import socket
import struct
import textwrap

ETH_IPV4 = 0x0800


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def ipv4_header(src, dst, proto, payload_len, ttl=64):
    total = 20 + payload_len
    return struct.pack("!BBHHHBBH4s4s",
                       0x45, 0, total, 0, 0, ttl, proto, 0,
                       socket.inet_aton(src), socket.inet_aton(dst))


def tcp_segment(sport, dport, flags=0x02, payload=b""):
    hdr = struct.pack("!HHIIBBHHH", sport, dport, 0, 0, 5 << 4, flags,
                      8192, 0, 0)
    return hdr + payload


def udp_segment(sport, dport, payload=b""):
    return struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload


def eth_frame(ip_packet, ethertype=ETH_IPV4):
    return b"\x02" * 6 + b"\x04" * 6 + struct.pack("!H", ethertype) + ip_packet


def tcp_packet(src, sport, dst, dport, flags=0x02, payload=b""):
    """Full Ethernet+IPv4+TCP frame bytes."""
    seg = tcp_segment(sport, dport, flags, payload)
    return eth_frame(ipv4_header(src, dst, 6, len(seg)) + seg)


def udp_packet(src, sport, dst, dport, payload=b""):
    seg = udp_segment(sport, dport, payload)
    return eth_frame(ipv4_header(src, dst, 17, len(seg)) + seg)


def arp_packet():
    return eth_frame(b"\x00" * 28, ethertype=0x0806)


def write_catalog(root, port=8080, capacity=4, extra_attack_yaml=None):
    """A minimal valid catalog tree under `root` for runtime tests."""
    (root / "attacks").mkdir(parents=True)
    (root / "services").mkdir()
    (root / "benign").mkdir()
    (root / "attacks" / "http_flood.yaml").write_text(textwrap.dedent(f"""\
        id: http_flood
        description: HTTP request flood against the target service.
        image: nsb-http-flood
        hook: entrypoint.sh
        params:
          - name: rate
            kind: integer
            default: 50
            min: 0
            max: 1000000
          - name: duration
            kind: duration
            default: 10s
            min: 100ms
            max: 1h
        mitre:
          tactics: [TA0040]
          techniques: [T1498]
        """), encoding="utf-8")
    if extra_attack_yaml:
        for name, body in extra_attack_yaml.items():
            (root / "attacks" / name).write_text(body, encoding="utf-8")
    (root / "services" / "web.yaml").write_text(textwrap.dedent(f"""\
        id: web
        image: nsb-http-target --delay-ms 1
        protocol: http
        port: {port}
        capacity_limit: {capacity}
        readiness:
          path: /
          timeout: 20s
        """), encoding="utf-8")
    (root / "benign" / "baseline.yaml").write_text(textwrap.dedent("""\
        id: baseline
        service: web
        clients: 1
        interarrival: 300ms
        duration: 20s
        """), encoding="utf-8")
    return root
