"""Syslog line formatting and delivery sinks shared by both probes."""
from __future__ import annotations

import os
import socket
import threading
from datetime import datetime, timezone

SYSLOG_PORT = 514
# EEE MMM dd HH:mm:ss zzz yyyy
DATETIME_FORMAT = "%a %b %d %H:%M:%S %Z %Y"


def format_datetime(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.strftime(DATETIME_FORMAT)


def format_probe_line(source: str, dt: datetime, event: str, ip: str, hms: str) -> str:
    """``Syslog <source> log: {syslog} <DATETIME> INFO <event> ipAddr=<ip>#timestamp=<hms>``."""
    return f"Syslog {source} log: {{syslog}} {format_datetime(dt)} INFO {event} ipAddr={ip}#timestamp={hms}"


def from_micros(ts: int, tz=timezone.utc) -> datetime:
    return datetime.fromtimestamp(ts / 1_000_000, tz=tz)


class ListSink:
    def __init__(self):
        self.lines: list[str] = []
        self._lock = threading.Lock()

    def send(self, line: str) -> None:
        with self._lock:
            self.lines.append(line)

    def close(self) -> None:
        pass


class FileSink:
    """Appends one line per message and flushes after each write."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._fh = open(self.path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def send(self, line: str) -> None:
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class UdpSink:
    def __init__(self, host: str = "127.0.0.1", port: int = SYSLOG_PORT):
        self.addr = (host, port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, line: str) -> None:
        self._sock.sendto(line.encode("utf-8"), self.addr)

    def close(self) -> None:
        self._sock.close()


class CallbackSink:
    def __init__(self, fn):
        self.fn = fn

    def send(self, line: str) -> None:
        self.fn(line)

    def close(self) -> None:
        pass


def open_sink(spec: str):
    """``udp://host:port``, ``file:path`` or a bare path."""
    if spec.startswith("udp://"):
        host, _, port = spec[len("udp://"):].rpartition(":")
        return UdpSink(host or "127.0.0.1", int(port or SYSLOG_PORT))
    if spec.startswith("file:"):
        return FileSink(spec[len("file:"):])
    if spec == "-":
        return CallbackSink(print)
    return FileSink(spec)
