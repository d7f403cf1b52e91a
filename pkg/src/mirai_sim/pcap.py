"""Classic little-endian pcap writer/reader for simulated traces.

Each record carries synthesized Ethernet + IPv4 + TCP/UDP headers only; the
original length field accounts for the payload that was not captured.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import UnorderedRecords
from .net import ETH_HEADER, IP_HEADER, TCP_HEADER, UDP_HEADER, Kind, Proto

PCAP_MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
SNAPLEN = 65535
GLOBAL_HEADER = struct.Struct("<IHHiIII")
RECORD_HEADER = struct.Struct("<IIII")

TCP_FLAGS = {
    Kind.SYN: 0x02,
    Kind.SYN_ACK: 0x12,
    Kind.ACK: 0x10,
}
PSH_ACK = 0x18

TRACE_FIELDS = (("t_us", np.int64), ("src", np.uint32), ("dst", np.uint32), ("sport", np.uint16),
                ("dport", np.uint16), ("proto", np.uint8), ("kind", np.uint8), ("payload", np.uint32),
                ("seq", np.uint64))
TRACE_DTYPE = np.dtype(list(TRACE_FIELDS))


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int  # microseconds
    src: int
    dst: int
    sport: int
    dport: int
    proto: int
    kind: int
    payload_bytes: int
    seq: int = 0

    @property
    def captured_length(self) -> int:
        return ETH_HEADER + IP_HEADER + (TCP_HEADER if self.proto == Proto.TCP else UDP_HEADER)


def records_to_array(records: Sequence[TraceRecord]) -> np.ndarray:
    return np.array([(r.timestamp, r.src, r.dst, r.sport, r.dport, r.proto, r.kind, r.payload_bytes, r.seq)
                     for r in records], dtype=TRACE_DTYPE)


def array_to_records(arr: np.ndarray) -> list[TraceRecord]:
    return [TraceRecord(*map(int, row)) for row in arr.tolist()]


def _mac(ip: np.ndarray) -> np.ndarray:
    # locally administered 02:00:<ip>
    out = np.zeros((len(ip), 6), dtype=np.uint8)
    out[:, 0] = 2
    out[:, 2:] = ip.astype(">u4").view(np.uint8).reshape(-1, 4)
    return out


_COMMON = [("ts_sec", "<u4"), ("ts_usec", "<u4"), ("incl_len", "<u4"), ("orig_len", "<u4"),
           ("eth_dst", "u1", (6,)), ("eth_src", "u1", (6,)), ("ethertype", ">u2"),
           ("ver_ihl", "u1"), ("tos", "u1"), ("tot_len", ">u2"), ("ip_id", ">u2"), ("frag", ">u2"),
           ("ttl", "u1"), ("ip_proto", "u1"), ("ip_csum", ">u2"), ("ip_src", ">u4"), ("ip_dst", ">u4"),
           ("sport", ">u2"), ("dport", ">u2")]
TCP_RECORD = np.dtype(_COMMON + [("seq", ">u4"), ("ack", ">u4"), ("offset", "u1"), ("flags", "u1"),
                                 ("window", ">u2"), ("csum", ">u2"), ("urg", ">u2")])
UDP_RECORD = np.dtype(_COMMON + [("length", ">u2"), ("csum", ">u2")])
assert TCP_RECORD.itemsize == 16 + 54 and UDP_RECORD.itemsize == 16 + 42


def _fill(arr: np.ndarray, sub: np.ndarray, l4_header: int) -> None:
    t = sub["t_us"]
    payload = sub["payload"].astype(np.int64)
    cap = ETH_HEADER + IP_HEADER + l4_header
    arr["ts_sec"] = t // 1_000_000
    arr["ts_usec"] = t % 1_000_000
    arr["incl_len"] = cap
    arr["orig_len"] = cap + payload
    arr["eth_dst"] = _mac(sub["dst"])
    arr["eth_src"] = _mac(sub["src"])
    arr["ethertype"] = 0x0800
    arr["ver_ihl"] = 0x45
    arr["tot_len"] = np.minimum(IP_HEADER + l4_header + payload, 0xFFFF)
    arr["ip_id"] = sub["seq"] & 0xFFFF
    arr["frag"] = 0x4000
    arr["ttl"] = 64
    arr["ip_proto"] = sub["proto"]
    arr["ip_src"] = sub["src"]
    arr["ip_dst"] = sub["dst"]
    arr["sport"] = sub["sport"]
    arr["dport"] = sub["dport"]


def encode_records(trace: np.ndarray) -> bytes:
    """Record headers + synthesized frame headers for every row of ``trace``."""
    n = len(trace)
    if n == 0:
        return b""
    is_tcp = trace["proto"] == Proto.TCP
    parts = []
    for mask, dtype, l4 in ((is_tcp, TCP_RECORD, TCP_HEADER), (~is_tcp, UDP_RECORD, UDP_HEADER)):
        sub = trace[mask]
        arr = np.zeros(len(sub), dtype=dtype)
        if len(sub):
            _fill(arr, sub, l4)
            if dtype is TCP_RECORD:
                arr["seq"] = sub["seq"] & 0xFFFFFFFF
                arr["offset"] = 0x50
                flags = np.full(len(sub), PSH_ACK, dtype=np.uint8)
                for kind, f in TCP_FLAGS.items():
                    flags[sub["kind"] == kind] = f
                arr["flags"] = flags
                arr["window"] = 0xFFFF
            else:
                arr["length"] = np.minimum(UDP_HEADER + sub["payload"].astype(np.int64), 0xFFFF)
        parts.append(arr)
    tcp_arr, udp_arr = parts
    if len(udp_arr) == 0:
        return tcp_arr.tobytes()
    if len(tcp_arr) == 0:
        return udp_arr.tobytes()
    # mixed trace: interleave the runs of same-protocol records
    cuts = np.flatnonzero(np.diff(is_tcp.astype(np.int8))) + 1
    chunks = []
    pos = {True: 0, False: 0}
    for lo, hi in zip(np.concatenate(([0], cuts)), np.concatenate((cuts, [n]))):
        tcp = bool(is_tcp[lo])
        src = tcp_arr if tcp else udp_arr
        chunks.append(src[pos[tcp]:pos[tcp] + hi - lo].tobytes())
        pos[tcp] += hi - lo
    return b"".join(chunks)


def global_header() -> bytes:
    return GLOBAL_HEADER.pack(PCAP_MAGIC, 2, 4, 0, 0, SNAPLEN, LINKTYPE_ETHERNET)


def write_trace(records, destination: str | Path | BinaryIO) -> int:
    """Write ``records`` (TraceRecord list or TRACE_DTYPE array) as pcap. Returns bytes written."""
    trace = records if isinstance(records, np.ndarray) else records_to_array(records)
    if len(trace) > 1 and np.any(np.diff(trace["t_us"]) < 0):
        raise UnorderedRecords("trace timestamps must be non-decreasing")
    data = global_header() + encode_records(trace)
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        Path(destination).write_bytes(data)
    return len(data)


@dataclass(frozen=True)
class PcapRecord:
    ts_sec: int
    ts_usec: int
    incl_len: int
    orig_len: int
    data: bytes

    @property
    def timestamp_us(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec


def read_pcap(source: str | Path | bytes) -> tuple[dict, list[PcapRecord]]:
    data = source if isinstance(source, bytes) else Path(source).read_bytes()
    magic, major, minor, zone, sigfigs, snaplen, linktype = GLOBAL_HEADER.unpack_from(data, 0)
    header = dict(magic=magic, version=(major, minor), thiszone=zone, sigfigs=sigfigs, snaplen=snaplen,
                  linktype=linktype)
    records = []
    off = GLOBAL_HEADER.size
    while off < len(data):
        sec, usec, incl, orig = RECORD_HEADER.unpack_from(data, off)
        off += RECORD_HEADER.size
        records.append(PcapRecord(sec, usec, incl, orig, data[off:off + incl]))
        off += incl
    if off != len(data):
        raise ValueError("truncated pcap record")
    return header, records


def decode_record(rec: PcapRecord) -> TraceRecord:
    """Inverse of the synthesized header encoding."""
    d = rec.data
    proto = d[23]
    src, dst = struct.unpack_from(">II", d, 26)
    sport, dport = struct.unpack_from(">HH", d, 34)
    payload = rec.orig_len - rec.incl_len
    if proto == Proto.TCP:
        seq = struct.unpack_from(">I", d, 38)[0]
        flags = d[47]
        kind = {v: k for k, v in TCP_FLAGS.items()}.get(flags, Kind.DATA)
    else:
        seq = struct.unpack_from(">H", d, 18)[0]
        kind = Kind.DATA
    return TraceRecord(rec.timestamp_us, src, dst, sport, dport, proto, int(kind), payload, seq)
