"""Packet capture decoding, bidirectional flow assembly and flow statistics.

Packets are reduced to :class:`PacketMeta`, grouped into bidirectional
5-tuple flows with an idle timeout, and each multi-packet flow is summarised
by the nine-attribute :class:`FeatureVector` (protocol indicator plus mean,
population std, min and max of packet lengths and inter-arrival times).
"""
from __future__ import annotations

import csv
import io
import ipaddress
import logging
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from .errors import MalformedCapture, SingletonFlow

logger = logging.getLogger(__name__)

TCP = "TCP"
UDP = "UDP"
_IPPROTO = {6: TCP, 17: UDP}
_IPPROTO_NUM = {TCP: 6, UDP: 17}

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D

LINKTYPE_NULL = 0
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_RAW_ALT = 12
LINKTYPE_LINUX_SLL = 113

DEFAULT_IDLE_TIMEOUT = 60.0

FEATURE_NAMES = (
    "proto",
    "avg_lgt", "std_lgt", "min_lgt", "max_lgt",
    "avg_iat", "std_iat", "min_iat", "max_iat",
)
CSV_HEADER = FEATURE_NAMES + ("label",)


@dataclass(frozen=True)
class PacketMeta:
    timestamp: int  # microseconds since epoch
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: str
    length: int  # IP total length, bytes
    payload: bytes = b""

    def swapped(self) -> "PacketMeta":
        return PacketMeta(self.timestamp, self.dst_ip, self.src_ip, self.dst_port,
                          self.src_port, self.proto, self.length, self.payload)


def _ip_key(ip: str) -> int:
    return int(ipaddress.IPv4Address(ip))


@dataclass(frozen=True, order=True)
class FlowKey:
    proto: str
    endpoint_lo: tuple[str, int]
    endpoint_hi: tuple[str, int]

    @classmethod
    def of(cls, pkt: PacketMeta) -> "FlowKey":
        a = (pkt.src_ip, pkt.src_port)
        b = (pkt.dst_ip, pkt.dst_port)
        if (_ip_key(a[0]), a[1]) > (_ip_key(b[0]), b[1]):
            a, b = b, a
        return cls(pkt.proto, a, b)

    def involves(self, ip: str) -> bool:
        return self.endpoint_lo[0] == ip or self.endpoint_hi[0] == ip


@dataclass
class FlowRecord:
    key: FlowKey
    first_ts: int
    last_ts: int
    packet_lengths: list[int] = field(default_factory=list)
    inter_arrival_times: list[float] = field(default_factory=list)  # ms

    @property
    def n_packets(self) -> int:
        return len(self.packet_lengths)

    def _add(self, pkt: PacketMeta) -> None:
        self.inter_arrival_times.append((pkt.timestamp - self.last_ts) / 1000.0)
        self.packet_lengths.append(pkt.length)
        self.last_ts = pkt.timestamp


@dataclass(frozen=True)
class FeatureVector:
    proto: int
    avg_lgt: float
    std_lgt: float
    min_lgt: float
    max_lgt: float
    avg_iat: float
    std_iat: float
    min_iat: float
    max_iat: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        vals = [float(v) for v in values]
        return cls(int(vals[0]), *vals[1:])


# ---------------------------------------------------------------------------
# pcap decoding

@dataclass
class DecodedCapture:
    packets: list[PacketMeta]
    skipped: int
    linktype: int


def _open_bytes(capture) -> BinaryIO:
    if isinstance(capture, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(capture))
    return capture


def iter_capture(capture, stats: dict | None = None) -> Iterator[PacketMeta]:
    """Stream :class:`PacketMeta` out of a pcap byte stream.

    ``stats`` (if given) receives ``skipped`` and ``linktype`` as decoding
    proceeds. Raises :class:`MalformedCapture` only for a bad global header.
    """
    fh = _open_bytes(capture)
    stats = stats if stats is not None else {}
    stats.setdefault("skipped", 0)
    header = fh.read(24)
    if len(header) < 24:
        raise MalformedCapture(f"truncated global header ({len(header)} bytes)")
    magic_le = struct.unpack("<I", header[:4])[0]
    if magic_le in (PCAP_MAGIC, PCAP_MAGIC_NS):
        endian = "<"
        magic = magic_le
    else:
        magic = struct.unpack(">I", header[:4])[0]
        if magic not in (PCAP_MAGIC, PCAP_MAGIC_NS):
            raise MalformedCapture(f"bad magic 0x{magic_le:08x}")
        endian = ">"
    frac_div = 1000 if magic == PCAP_MAGIC_NS else 1
    linktype = struct.unpack(endian + "I", header[20:24])[0] & 0x0FFFFFFF
    if linktype not in (LINKTYPE_NULL, LINKTYPE_ETHERNET, LINKTYPE_RAW,
                        LINKTYPE_RAW_ALT, LINKTYPE_LINUX_SLL):
        raise MalformedCapture(f"unsupported link type {linktype}")
    stats["linktype"] = linktype
    rec_fmt = endian + "IIII"
    while True:
        rec = fh.read(16)
        if not rec:
            return
        if len(rec) < 16:
            stats["skipped"] += 1
            return
        ts_sec, ts_frac, incl_len, _orig_len = struct.unpack(rec_fmt, rec)
        data = fh.read(incl_len)
        if len(data) < incl_len:
            stats["skipped"] += 1
            return
        pkt = _decode_frame(data, linktype, ts_sec * 1_000_000 + ts_frac // frac_div)
        if pkt is None:
            stats["skipped"] += 1
        else:
            yield pkt


def decode_capture(capture) -> DecodedCapture:
    """Decode a whole capture. ``capture`` is bytes or a binary file object."""
    stats: dict = {}
    packets = list(iter_capture(capture, stats))
    return DecodedCapture(packets, stats["skipped"], stats.get("linktype", -1))


def _decode_frame(frame: bytes, linktype: int, ts: int) -> PacketMeta | None:
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            return None
        ethertype = struct.unpack("!H", frame[12:14])[0]
        off = 14
        while ethertype in (0x8100, 0x88A8):
            if len(frame) < off + 4:
                return None
            ethertype = struct.unpack("!H", frame[off + 2:off + 4])[0]
            off += 4
        if ethertype != 0x0800:
            return None
        return _decode_ipv4(frame[off:], ts)
    if linktype == LINKTYPE_LINUX_SLL:
        if len(frame) < 16 or struct.unpack("!H", frame[14:16])[0] != 0x0800:
            return None
        return _decode_ipv4(frame[16:], ts)
    if linktype == LINKTYPE_NULL:
        if len(frame) < 4:
            return None
        family = struct.unpack("<I", frame[:4])[0]
        if family != 2 and struct.unpack(">I", frame[:4])[0] != 2:
            return None
        return _decode_ipv4(frame[4:], ts)
    return _decode_ipv4(frame, ts)


def _decode_ipv4(ip: bytes, ts: int) -> PacketMeta | None:
    if len(ip) < 20 or ip[0] >> 4 != 4:
        return None
    ihl = (ip[0] & 0x0F) * 4
    total_len = struct.unpack("!H", ip[2:4])[0]
    frag = struct.unpack("!H", ip[6:8])[0]
    proto = _IPPROTO.get(ip[9])
    if proto is None or ihl < 20 or total_len < ihl or len(ip) < ihl:
        return None
    if frag & 0x1FFF:
        # non-first fragment carries no transport header
        return None
    end = min(total_len, len(ip))
    l4 = ip[ihl:end]
    if proto == TCP:
        if len(l4) < 20:
            return None
        doff = (l4[12] >> 4) * 4
        if doff < 20 or len(l4) < doff or total_len < ihl + doff:
            return None
        payload = l4[doff:]
    else:
        if len(l4) < 8 or total_len < ihl + 8:
            return None
        payload = l4[8:]
    src_port, dst_port = struct.unpack("!HH", l4[:4])
    return PacketMeta(
        timestamp=ts,
        src_ip=str(ipaddress.IPv4Address(ip[12:16])),
        dst_ip=str(ipaddress.IPv4Address(ip[16:20])),
        src_port=src_port,
        dst_port=dst_port,
        proto=proto,
        length=total_len,
        payload=bytes(payload),
    )


# ---------------------------------------------------------------------------
# pcap encoding (synthetic captures, tests, replay)

def header_size(proto: str) -> int:
    return 20 + (20 if proto == TCP else 8)


def _checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\0"
    s = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def encode_frame(pkt: PacketMeta) -> bytes:
    """Ethernet + IPv4 + TCP/UDP frame. The payload is zero-padded up to ``pkt.length``."""
    hdr = header_size(pkt.proto)
    payload = pkt.payload
    if hdr + len(payload) < pkt.length:
        payload = payload + b"\0" * (pkt.length - hdr - len(payload))
    total = hdr + len(payload)
    if pkt.proto == TCP:
        l4 = struct.pack("!HHIIBBHHH", pkt.src_port, pkt.dst_port, 0, 0, 5 << 4, 0x18, 65535, 0, 0)
    else:
        l4 = struct.pack("!HHHH", pkt.src_port, pkt.dst_port, 8 + len(payload), 0)
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64, _IPPROTO_NUM[pkt.proto], 0,
                     ipaddress.IPv4Address(pkt.src_ip).packed,
                     ipaddress.IPv4Address(pkt.dst_ip).packed)
    ip = ip[:10] + struct.pack("!H", _checksum(ip)) + ip[12:]
    eth = b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x08\x00"
    return eth + ip + l4 + payload


def pcap_header(linktype: int = LINKTYPE_ETHERNET, endian: str = "<") -> bytes:
    return struct.pack(endian + "IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, 65535, linktype)


def pcap_record(frame: bytes, ts: int, endian: str = "<") -> bytes:
    return struct.pack(endian + "IIII", ts // 1_000_000, ts % 1_000_000, len(frame), len(frame)) + frame


def encode_capture(packets: Iterable[PacketMeta], endian: str = "<") -> bytes:
    out = [pcap_header(endian=endian)]
    for pkt in packets:
        out.append(pcap_record(encode_frame(pkt), pkt.timestamp, endian))
    return b"".join(out)


def write_capture(packets: Iterable[PacketMeta], path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_capture(packets))


# ---------------------------------------------------------------------------
# flow assembly

class FlowAssembler:
    """Incremental bidirectional flow builder.

    Feeding a packet stream in any number of chunks and then calling
    :meth:`flush` gives the same flows as a single call to
    :func:`assemble_flows`.
    """

    def __init__(self, idle_timeout: float = DEFAULT_IDLE_TIMEOUT):
        if not idle_timeout > 0:
            raise ValueError("idle_timeout must be > 0")
        self.idle_timeout_us = int(round(idle_timeout * 1_000_000))
        self._open: dict[FlowKey, FlowRecord] = {}
        self._closed: list[FlowRecord] = []
        self._seq = 0
        self._order: dict[int, int] = {}

    def _start(self, key: FlowKey, pkt: PacketMeta) -> None:
        rec = FlowRecord(key, pkt.timestamp, pkt.timestamp, [pkt.length], [])
        self._order[id(rec)] = self._seq
        self._seq += 1
        self._open[key] = rec

    def add(self, pkt: PacketMeta) -> None:
        key = FlowKey.of(pkt)
        rec = self._open.get(key)
        if rec is None:
            self._start(key, pkt)
        elif pkt.timestamp - rec.last_ts > self.idle_timeout_us:
            self._closed.append(rec)
            self._start(key, pkt)
        else:
            rec._add(pkt)

    def feed(self, packets: Iterable[PacketMeta]) -> None:
        for pkt in packets:
            self.add(pkt)

    def expire(self, now: int) -> list[FlowRecord]:
        """Close flows idle at time ``now`` (µs) and return every closed flow so far."""
        for key, rec in list(self._open.items()):
            if now - rec.last_ts > self.idle_timeout_us:
                self._closed.append(self._open.pop(key))
        return self._drain()

    def flush(self) -> list[FlowRecord]:
        self._closed.extend(self._open.values())
        self._open.clear()
        return self._drain()

    def _drain(self) -> list[FlowRecord]:
        out = sorted(self._closed, key=lambda r: (r.first_ts, self._order[id(r)]))
        for r in out:
            del self._order[id(r)]
        self._closed = []
        return out


def assemble_flows(packets: Iterable[PacketMeta],
                   idle_timeout: float = DEFAULT_IDLE_TIMEOUT) -> list[FlowRecord]:
    asm = FlowAssembler(idle_timeout)
    asm.feed(packets)
    return asm.flush()


# ---------------------------------------------------------------------------
# features

def extract_features(flow: FlowRecord) -> FeatureVector:
    if flow.n_packets < 2:
        raise SingletonFlow(f"flow {flow.key} has {flow.n_packets} packet(s)")
    lgt = np.asarray(flow.packet_lengths, dtype=float)
    iat = np.asarray(flow.inter_arrival_times, dtype=float)
    return FeatureVector(
        proto=1 if flow.key.proto == UDP else 0,
        avg_lgt=float(lgt.mean()), std_lgt=float(lgt.std()),
        min_lgt=float(lgt.min()), max_lgt=float(lgt.max()),
        avg_iat=float(iat.mean()), std_iat=float(iat.std()),
        min_iat=float(iat.min()), max_iat=float(iat.max()),
    )


def flow_features(flows: Iterable[FlowRecord]) -> list[tuple[FlowRecord, FeatureVector]]:
    """Features for every multi-packet flow; singletons are dropped."""
    out = []
    for flow in flows:
        if flow.n_packets >= 2:
            out.append((flow, extract_features(flow)))
    return out


def _fmt(v: float) -> str:
    # shortest round-trip repr, always dot decimal
    return repr(float(v))


def write_features_csv(vectors: Iterable[FeatureVector], fh, label: str | None = None) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    n = 0
    for v in vectors:
        writer.writerow([_fmt(x) for x in v.as_array()] + [label or ""])
        n += 1
    return n
