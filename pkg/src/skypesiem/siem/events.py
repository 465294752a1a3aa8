"""Normalized SIEM events and the agent that maps probe syslog lines onto them."""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone

from ..errors import NormalizationFailed

PLUGIN_SNORT_ATTACH = 4059
PLUGIN_SKYPE_SESSION = 4060

EVENT_PLUGINS = {
    "SnortSkypeAttach": PLUGIN_SNORT_ATTACH,
    "SkypeSession": PLUGIN_SKYPE_SESSION,
}

# The agent's published expression expects ", " after the address while the
# probes separate fields with "#"; captures stop at ',', '#' or whitespace.
AGENT_REGEX = re.compile(
    r"ipAddr=(?P<userdata1>[^,#\s]+)[,#\s]?.*?timestamp=(?P<userdata2>[^,#\s]+)"
)
_HEADER = re.compile(
    r"\{syslog\}\s+(?P<dt>.*?)\s+(?P<level>INFO|WARN|WARNING|ERROR|DEBUG|NOTICE)\s+(?P<event>\w+)\s"
)
_DATETIME = re.compile(
    r"^(?P<dow>[A-Z][a-z]{2})\s+(?P<mon>[A-Z][a-z]{2})\s+(?:(?P<day>\d{1,2})\s+)?"
    r"(?P<h>\d{1,2}):(?P<m>\d{2}):(?P<s>\d{2})\s+(?:(?P<tz>[A-Za-z]{1,5})\s+)?(?P<year>\d{4})$"
)
_MONTHS = {m: i for i, m in enumerate(
    ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"], start=1)}
_TZ_OFFSETS = {"UTC": 0, "GMT": 0, "Z": 0, "CET": 1, "CEST": 2, "EET": 2, "EEST": 3,
               "WET": 0, "WEST": 1, "BST": 1, "EST": -5, "EDT": -4, "CST": -6, "CDT": -5,
               "MST": -7, "MDT": -6, "PST": -8, "PDT": -7}


def parse_syslog_datetime(text: str) -> datetime:
    """Parse ``EEE MMM dd HH:mm:ss zzz yyyy``; a missing day-of-month reads as the 1st."""
    m = _DATETIME.match(text.strip())
    if not m or m["mon"] not in _MONTHS:
        raise NormalizationFailed(f"unparseable datetime {text!r}")
    tz = m["tz"]
    tzinfo = None
    if tz:
        if tz.upper() not in _TZ_OFFSETS:
            raise NormalizationFailed(f"unknown time zone {tz!r}")
        tzinfo = timezone(timedelta(hours=_TZ_OFFSETS[tz.upper()]), tz.upper())
    return datetime(int(m["year"]), _MONTHS[m["mon"]], int(m["day"] or 1),
                    int(m["h"]), int(m["m"]), int(m["s"]), tzinfo=tzinfo)


@dataclass
class NormalizedEvent:
    plugin_id: int
    plugin_sid: int
    type: str = "detector"
    date: datetime | None = None
    sensor: str = ""
    interface: str = ""
    priority: int = 1
    protocol: str = ""
    src_ip: str | None = None
    src_port: int | None = None
    dst_ip: str | None = None
    dst_port: int | None = None
    log: str = ""
    userdata: list[str | None] = field(default_factory=lambda: [None] * 9)
    event_type: str = ""
    id: int | None = None

    def __post_init__(self):
        if self.plugin_id is None or self.plugin_sid is None:
            raise ValueError("plugin_id and plugin_sid are mandatory")
        if not 0 <= self.priority <= 5:
            raise ValueError(f"priority {self.priority} outside [0, 5]")
        if self.type not in ("detector", "monitor"):
            raise ValueError(f"event type must be detector or monitor, not {self.type!r}")
        if len(self.userdata) != 9:
            self.userdata = (list(self.userdata) + [None] * 9)[:9]

    @property
    def userdata_1(self) -> str | None:
        return self.userdata[0]

    @property
    def userdata_2(self) -> str | None:
        return self.userdata[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["date"] = self.date.isoformat() if self.date else None
        d.pop("userdata")
        for i, v in enumerate(self.userdata, start=1):
            d[f"userdata_{i}"] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizedEvent":
        d = dict(d)
        d.pop("kind", None)
        userdata = [d.pop(f"userdata_{i}", None) for i in range(1, 10)]
        date = d.pop("date", None)
        ev = cls(**d, userdata=userdata)
        ev.date = datetime.fromisoformat(date) if date else None
        return ev


def normalize(raw: str, source_plugin: int | None = None, sensor: str = "",
              interface: str = "") -> NormalizedEvent:
    """Map a probe syslog line onto a :class:`NormalizedEvent`.

    ``plugin_id`` comes from the event name (SnortSkypeAttach 4059,
    SkypeSession 4060), falling back to ``source_plugin``.
    """
    line = raw.rstrip("\r\n")
    m = AGENT_REGEX.search(line)
    if not m:
        raise NormalizationFailed("ipAddr/timestamp tokens not found")
    head = _HEADER.search(line)
    event_type = head["event"] if head else ""
    plugin_id = EVENT_PLUGINS.get(event_type, source_plugin)
    if plugin_id is None:
        raise NormalizationFailed(f"no plugin for event {event_type!r}")
    date = parse_syslog_datetime(head["dt"]) if head else None
    userdata = [m["userdata1"], m["userdata2"]] + [None] * 7
    return NormalizedEvent(plugin_id=plugin_id, plugin_sid=1, type="detector", date=date,
                           sensor=sensor, interface=interface, log=line,
                           userdata=userdata, event_type=event_type)
