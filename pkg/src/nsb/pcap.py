"""Classic pcap reading and writing (microsecond resolution, no pcapng).

Writer emits little-endian files with magic 0xa1b2c3d4; the reader accepts
both byte orders. A file cut mid-record yields TruncatedRecord carrying every
record read before the cut.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import BadMagic, TruncatedRecord

MAGIC = 0xA1B2C3D4
LINKTYPE_NULL = 0
LINKTYPE_ETHERNET = 1
DEFAULT_SNAPLEN = 65535

_GLOBAL_FMT = "IHHiIII"   # magic, major, minor, thiszone, sigfigs, snaplen, network
_RECORD_FMT = "IIII"      # ts_sec, ts_usec, incl_len, orig_len


@dataclass(frozen=True)
class PacketRecord:
    ts_sec: int
    ts_usec: int
    original_len: int
    data: bytes

    @property
    def captured_len(self) -> int:
        return len(self.data)

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6


class PcapWriter:
    """Streaming pcap writer; single exclusive writer per file."""

    def __init__(self, path, linktype=LINKTYPE_ETHERNET, snaplen=DEFAULT_SNAPLEN):
        self.path = path
        self.snaplen = snaplen
        self._fh = open(path, "wb")
        self._fh.write(struct.pack("<" + _GLOBAL_FMT, MAGIC, 2, 4, 0, 0, snaplen, linktype))
        self.packet_count = 0

    def write(self, record: PacketRecord):
        data = record.data[: self.snaplen]
        self._fh.write(struct.pack("<" + _RECORD_FMT, record.ts_sec, record.ts_usec,
                                   len(data), record.original_len))
        self._fh.write(data)
        self.packet_count += 1

    def flush(self):
        self._fh.flush()

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_pcap(path, records, linktype=LINKTYPE_ETHERNET, snaplen=DEFAULT_SNAPLEN):
    with PcapWriter(path, linktype=linktype, snaplen=snaplen) as w:
        for rec in records:
            w.write(rec)


def read_pcap(path):
    """Return (records, linktype). Raises BadMagic or TruncatedRecord; the
    latter carries records parsed before the truncation point."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24:
        if len(blob) >= 4:
            (magic,) = struct.unpack("<I", blob[:4])
            if magic not in (MAGIC, struct.unpack("<I", struct.pack(">I", MAGIC))[0]):
                raise BadMagic(magic)
        raise TruncatedRecord(len(blob), [])

    (magic,) = struct.unpack("<I", blob[:4])
    if magic == MAGIC:
        endian = "<"
    elif struct.unpack(">I", blob[:4])[0] == MAGIC:
        endian = ">"
    else:
        raise BadMagic(magic)

    _, _, _, _, _, _snaplen, linktype = struct.unpack(endian + _GLOBAL_FMT, blob[:24])
    records = []
    offset = 24
    rec_hdr = struct.Struct(endian + _RECORD_FMT)
    while offset < len(blob):
        if offset + 16 > len(blob):
            raise TruncatedRecord(offset, records)
        ts_sec, ts_usec, incl_len, orig_len = rec_hdr.unpack_from(blob, offset)
        if offset + 16 + incl_len > len(blob):
            raise TruncatedRecord(offset, records)
        data = blob[offset + 16: offset + 16 + incl_len]
        records.append(PacketRecord(ts_sec=ts_sec, ts_usec=ts_usec,
                                    original_len=orig_len, data=data))
        offset += 16 + incl_len
    return records, linktype
