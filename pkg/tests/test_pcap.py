import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsb.errors import BadMagic, TruncatedRecord
from nsb.pcap import (
    LINKTYPE_ETHERNET,
    MAGIC,
    PacketRecord,
    PcapWriter,
    read_pcap,
    write_pcap,
)


def _records(n, size=40):
    return [PacketRecord(ts_sec=1700000000 + i, ts_usec=i * 7 % 1000000,
                         original_len=size + i, data=bytes([i % 256]) * (size + i))
            for i in range(n)]


def test_round_trip_exact(tmp_path):
    recs = _records(25)
    path = tmp_path / "t.pcap"
    write_pcap(path, recs, linktype=LINKTYPE_ETHERNET)
    back, linktype = read_pcap(path)
    assert linktype == LINKTYPE_ETHERNET
    assert back == recs


def test_snaplen_truncates_captured_not_original(tmp_path):
    rec = PacketRecord(ts_sec=1, ts_usec=2, original_len=100, data=b"x" * 100)
    path = tmp_path / "s.pcap"
    write_pcap(path, [rec], snaplen=10)
    back, _ = read_pcap(path)
    assert back[0].captured_len == 10
    assert back[0].original_len == 100
    assert back[0].data == b"x" * 10


def test_big_endian_files_read(tmp_path):
    rec = PacketRecord(ts_sec=11, ts_usec=22, original_len=4, data=b"abcd")
    blob = struct.pack(">IHHiIII", MAGIC, 2, 4, 0, 0, 65535, 1)
    blob += struct.pack(">IIII", rec.ts_sec, rec.ts_usec, 4, 4) + rec.data
    path = tmp_path / "be.pcap"
    path.write_bytes(blob)
    back, linktype = read_pcap(path)
    assert linktype == 1
    assert back == [rec]


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.pcap"
    path.write_bytes(b"NOTAPCAPFILE" + b"\x00" * 40)
    with pytest.raises(BadMagic):
        read_pcap(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "short.pcap"
    path.write_bytes(struct.pack("<I", MAGIC) + b"\x00" * 5)
    with pytest.raises(TruncatedRecord) as exc:
        read_pcap(path)
    assert exc.value.records == []


def test_truncation_keeps_prior_records(tmp_path):
    recs = _records(5)
    path = tmp_path / "cut.pcap"
    write_pcap(path, recs)
    blob = path.read_bytes()
    for cut in (len(blob) - 1, len(blob) - recs[-1].captured_len - 8):
        cut_path = tmp_path / f"cut{cut}.pcap"
        cut_path.write_bytes(blob[:cut])
        with pytest.raises(TruncatedRecord) as exc:
            read_pcap(cut_path)
        assert exc.value.records == recs[:4]
        assert exc.value.offset > 24


def test_empty_file(tmp_path):
    path = tmp_path / "empty.pcap"
    path.write_bytes(b"")
    with pytest.raises(TruncatedRecord) as exc:
        read_pcap(path)
    assert exc.value.records == []


def test_streaming_writer_counts(tmp_path):
    path = tmp_path / "stream.pcap"
    with PcapWriter(path) as w:
        for rec in _records(3):
            w.write(rec)
        assert w.packet_count == 3
    back, _ = read_pcap(path)
    assert len(back) == 3


record_strategy = st.builds(
    PacketRecord,
    ts_sec=st.integers(0, 2**32 - 1),
    ts_usec=st.integers(0, 999999),
    original_len=st.integers(0, 2000),
    data=st.binary(min_size=0, max_size=400),
).map(lambda r: PacketRecord(r.ts_sec, r.ts_usec,
                             max(r.original_len, len(r.data)), r.data))


@settings(max_examples=120, deadline=None)
@given(recs=st.lists(record_strategy, min_size=0, max_size=20),
       linktype=st.sampled_from([0, 1, 101]))
def test_random_round_trip(tmp_path_factory, recs, linktype):
    path = tmp_path_factory.mktemp("pcap") / "r.pcap"
    write_pcap(path, recs, linktype=linktype)
    back, lt = read_pcap(path)
    assert lt == linktype
    assert back == recs
