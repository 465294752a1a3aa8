"""Clear-text login signature matching (a minimal Snort stand-in).

Two signatures are recognised: a TCP payload containing ``conn.skype.com``
(sid 1030) and the UDP super-node probe, a 25-39 byte datagram with 0x02 at
payload offset 12 (sid 1031). A match produces a :class:`TriggerEvent` and a
``SnortSkypeAttach`` syslog line.
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator

from .flowkit import TCP, UDP, PacketMeta
from .syslogio import format_probe_line, from_micros

SNORT_SOURCE = "Snort"
ATTACH_EVENT = "SnortSkypeAttach"

SID_CONN_SKYPE = 1030
SID_UDP_PROBE = 1031

UDP_PROBE_MIN = 25
UDP_PROBE_MAX = 39
UDP_PROBE_OFFSET = 12
UDP_PROBE_VALUE = 0x02


@dataclass(frozen=True)
class ContentRule:
    proto: str
    content: bytes
    sid: int
    msg: str = ""

    def __post_init__(self):
        if not self.content:
            raise ValueError("rule content must be non-empty")
        if self.proto not in (TCP, UDP):
            raise ValueError(f"unsupported rule protocol {self.proto!r}")


@dataclass(frozen=True)
class UdpProbeRule:
    sid: int = SID_UDP_PROBE
    offset: int = UDP_PROBE_OFFSET
    min_len: int = UDP_PROBE_MIN
    max_len: int = UDP_PROBE_MAX
    value: int = UDP_PROBE_VALUE
    msg: str = "skype super node probe"
    proto: str = UDP


DEFAULT_RULES = (
    ContentRule(TCP, b"conn.skype.com", SID_CONN_SKYPE, "skype login attempt"),
    UdpProbeRule(),
)


def load_rules(text: str) -> list:
    """One rule per line: ``proto=tcp content="conn.skype.com" sid=1030 msg="..."``."""
    rules = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = {}
        for tok in shlex.split(line):
            key, sep, val = tok.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: expected key=value, got {tok!r}")
            fields[key.strip().lower()] = val
        try:
            if "content" not in fields and "offset" in fields:
                # byte test: proto=udp offset=12 value=0x02 min=25 max=39 sid=1031
                rule = UdpProbeRule(int(fields["sid"]), int(fields["offset"], 0),
                                    int(fields.get("min", UDP_PROBE_MIN)),
                                    int(fields.get("max", UDP_PROBE_MAX)),
                                    int(fields.get("value", "0x02"), 0), fields.get("msg", ""))
            else:
                rule = ContentRule(fields["proto"].upper(), fields["content"].encode("latin-1"),
                                   int(fields["sid"]), fields.get("msg", ""))
        except KeyError as exc:
            raise ValueError(f"line {lineno}: missing field {exc}") from None
        if rule.sid in seen:
            raise ValueError(f"line {lineno}: duplicate sid {rule.sid}")
        seen.add(rule.sid)
        rules.append(rule)
    return rules


def dump_rules(rules) -> str:
    out = []
    for r in rules:
        if isinstance(r, UdpProbeRule):
            out.append(f"proto=udp offset={r.offset} value=0x{r.value:02x} min={r.min_len} "
                       f'max={r.max_len} sid={r.sid} msg="{r.msg}"')
            continue
        out.append(f'proto={r.proto.lower()} content="{r.content.decode("latin-1")}" '
                   f'sid={r.sid} msg="{r.msg}"')
    return "\n".join(out) + "\n"


def match_content(pkt: PacketMeta, rule: ContentRule) -> bool:
    return pkt.proto == rule.proto and rule.content in pkt.payload


def match_udp_login_probe(pkt: PacketMeta, rule: UdpProbeRule = UdpProbeRule()) -> bool:
    if pkt.proto != UDP:
        return False
    n = len(pkt.payload)
    if not rule.min_len <= n <= rule.max_len or n <= rule.offset:
        return False
    return pkt.payload[rule.offset] == rule.value


def matches(pkt: PacketMeta, rule) -> bool:
    if isinstance(rule, UdpProbeRule):
        return match_udp_login_probe(pkt, rule)
    return match_content(pkt, rule)


@dataclass(frozen=True)
class TriggerEvent:
    ip_addr: str
    timestamp: str  # HH:MM:SS
    sid: int
    wall_time: datetime

    @classmethod
    def from_packet(cls, pkt: PacketMeta, sid: int, tz=timezone.utc) -> "TriggerEvent":
        dt = from_micros(pkt.timestamp, tz)
        return cls(pkt.src_ip, dt.strftime("%H:%M:%S"), sid, dt)


def scan(packets: Iterable[PacketMeta], rules=DEFAULT_RULES, tz=timezone.utc) -> Iterator[TriggerEvent]:
    """One event per matching packet (first matching rule wins), in packet order."""
    for pkt in packets:
        for rule in rules:
            if matches(pkt, rule):
                yield TriggerEvent.from_packet(pkt, rule.sid, tz)
                break


def emit_trigger_syslog(ev: TriggerEvent) -> str:
    return format_probe_line(SNORT_SOURCE, ev.wall_time, ATTACH_EVENT, ev.ip_addr, ev.timestamp)


class TriggerProbe:
    """Scans a packet stream and sends a syslog line per match."""

    def __init__(self, sink, rules=DEFAULT_RULES, tz=timezone.utc):
        self.sink = sink
        self.rules = tuple(rules)
        self.tz = tz
        self.events: list[TriggerEvent] = []

    def process(self, packets: Iterable[PacketMeta]) -> list[TriggerEvent]:
        out = []
        for ev in scan(packets, self.rules, self.tz):
            self.sink.send(emit_trigger_syslog(ev))
            out.append(ev)
        self.events.extend(out)
        return out
