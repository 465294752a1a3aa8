"""Detection probe: SIEM handshake, per-host activation and windowed classification.

Packets of monitored hosts are buffered into tumbling windows aligned to
multiples of ``window_seconds``. When a window closes its packets are
assembled into flows, each multi-packet flow is classified by the three-model
ensemble, and for every monitored host the fraction of its flows voted Skype
is compared against ``auc_th``. A window that reaches the threshold produces
a ``SkypeSession`` syslog line stamped with the window end.
"""
from __future__ import annotations

import ipaddress
import logging
import socket
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

from .errors import ConnectionRefused, HandshakeRejected, HandshakeTimeout, InvalidAddress
from .flowkit import DEFAULT_IDLE_TIMEOUT, FlowRecord, PacketMeta, assemble_flows, extract_features
from .metrics import ThresholdConfig
from .syslogio import format_probe_line, from_micros
from .voting import Ensemble

logger = logging.getLogger(__name__)

DEFAULT_SERVER_PORT = 40001
DEFAULT_WINDOW_SECONDS = 300
HANDSHAKE_TIMEOUT = 5.0
HANDSHAKE_LINE = 'Connect id="1" type="web" version="3.1.4" hostname="ossim-server" tzone="1"'
HANDSHAKE_OK = "Ok id=1"
PROBE_SOURCE = "ESkyPRO"
SESSION_EVENT = "SkypeSession"


def _check_ipv4(host: str) -> str:
    try:
        return str(ipaddress.IPv4Address(host.strip()))
    except (ipaddress.AddressValueError, AttributeError):
        raise InvalidAddress(f"not an IPv4 address: {host!r}") from None


@dataclass
class ProbeConfig:
    server: str = "127.0.0.1"
    port: int = DEFAULT_SERVER_PORT
    window_seconds: float = DEFAULT_WINDOW_SECONDS
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT
    handshake_line: str = HANDSHAKE_LINE
    monitored_hosts: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.window_seconds > 0:
            raise ValueError("window_seconds must be > 0")


@dataclass(frozen=True)
class WindowVerdict:
    host: str
    window_start: datetime
    window_end: datetime
    flows_total: int
    flows_skype: int
    score: float
    fired: bool


def evaluate_window(flows: Iterable[FlowRecord], models, threshold: ThresholdConfig,
                    host: str, window_start: datetime, window_end: datetime) -> WindowVerdict:
    """Classify the host's multi-packet flows; score = fraction voted Skype."""
    ens = models if isinstance(models, Ensemble) else Ensemble(models)
    flows = [f for f in flows if f.n_packets >= 2 and f.key.involves(host)]
    if flows:
        X = [extract_features(f).as_array() for f in flows]
        labels, _, _ = ens.decide_many(X)
        n_skype = int((labels == 0).sum())
    else:
        n_skype = 0
    total = len(flows)
    score = n_skype / total if total else 0.0
    fired = total >= 1 and score >= threshold.auc_th
    return WindowVerdict(host, window_start, window_end, total, n_skype, score, fired)


def emit_session_syslog(verdict: WindowVerdict, wall_time: datetime | None = None) -> str:
    if not verdict.fired:
        raise ValueError("only fired verdicts are reported")
    return format_probe_line(PROBE_SOURCE, wall_time or verdict.window_end, SESSION_EVENT,
                             verdict.host, verdict.window_end.strftime("%H:%M:%S"))


class SkypeProbe:
    """Windowed detector. Feed packets with :meth:`ingest`; :meth:`flush` closes the last window."""

    def __init__(self, config: ProbeConfig, models, sink=None, tz=timezone.utc):
        self.config = config
        self.ensemble = models if isinstance(models, Ensemble) else Ensemble(models)
        self.sink = sink
        self.tz = tz
        self.verdicts: list[WindowVerdict] = []
        self.emitted: list[str] = []
        self.windows_classified = 0
        self.flows_classified = 0
        self._lock = threading.Lock()
        self._window_us = int(round(config.window_seconds * 1_000_000))
        self._current: int | None = None  # window index
        self._buffer: list[PacketMeta] = []

    @property
    def monitored_hosts(self) -> set[str]:
        return self.config.monitored_hosts

    def activate(self, host: str) -> str:
        ip = _check_ipv4(host)
        with self._lock:
            self.config.monitored_hosts.add(ip)
        logger.info("monitoring %s", ip)
        return "OK"

    def _monitored(self, pkt: PacketMeta) -> bool:
        with self._lock:
            hosts = self.config.monitored_hosts
            return pkt.src_ip in hosts or pkt.dst_ip in hosts

    def ingest(self, packets: Iterable[PacketMeta]) -> list[WindowVerdict]:
        out = []
        for pkt in packets:
            idx = pkt.timestamp // self._window_us
            if self._current is not None and idx != self._current:
                out.extend(self._close())
            if self._current is None or idx != self._current:
                self._current = idx
            if self._monitored(pkt):
                self._buffer.append(pkt)
        return out

    def flush(self) -> list[WindowVerdict]:
        return self._close() if self._current is not None else []

    def _close(self) -> list[WindowVerdict]:
        packets, self._buffer = self._buffer, []
        idx, self._current = self._current, None
        if not packets:
            return []
        start = from_micros(idx * self._window_us, self.tz)
        end = from_micros((idx + 1) * self._window_us, self.tz)
        flows = [f for f in assemble_flows(packets, self.config.idle_timeout) if f.n_packets >= 2]
        with self._lock:
            hosts = sorted(self.config.monitored_hosts, key=lambda h: ipaddress.IPv4Address(h))
        out = []
        for host in hosts:
            v = evaluate_window(flows, self.ensemble, self.config.threshold, host, start, end)
            if v.flows_total == 0:
                continue
            out.append(v)
            if v.fired:
                assert v.score >= self.config.threshold.auc_th
                line = emit_session_syslog(v)
                self.emitted.append(line)
                if self.sink is not None:
                    self.sink.send(line)
        self.windows_classified += 1
        self.flows_classified += len(flows)
        self.verdicts.extend(out)
        return out


# ---------------------------------------------------------------------------
# control channel

class ProbeSession:
    """An established control connection to the SIEM."""

    def __init__(self, sock: socket.socket, reader):
        self.sock = sock
        self._reader = reader
        self._thread: threading.Thread | None = None
        self._wlock = threading.Lock()
        self.activations: list[str] = []

    def send_line(self, line: str) -> None:
        with self._wlock:
            self.sock.sendall((line + "\n").encode())

    def serve_activations(self, on_activate) -> threading.Thread:
        """Answer ``ACTIVATE <ip>`` lines with ``OK`` (or ``ERR ...``) in a background thread."""
        def loop():
            try:
                for raw in self._reader:
                    line = raw.decode("utf-8", "replace").strip()
                    verb, _, arg = line.partition(" ")
                    if verb != "ACTIVATE":
                        continue
                    try:
                        on_activate(arg)
                        self.activations.append(arg.strip())
                        self.send_line("OK")
                    except InvalidAddress as exc:
                        self.send_line(f"ERR {exc}")
            except (OSError, ValueError):
                pass
        self.sock.settimeout(None)
        self._thread = threading.Thread(target=loop, daemon=True)
        self._thread.start()
        return self._thread

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def handshake(server: str, port: int = DEFAULT_SERVER_PORT, timeout: float = HANDSHAKE_TIMEOUT,
              line: str = HANDSHAKE_LINE) -> ProbeSession:
    try:
        sock = socket.create_connection((server, port), timeout=timeout)
    except ConnectionRefusedError as exc:
        raise ConnectionRefused(f"{server}:{port} refused the connection") from exc
    except socket.timeout as exc:
        raise HandshakeTimeout(f"connect to {server}:{port} timed out") from exc
    try:
        sock.sendall((line + "\n").encode())
        reader = sock.makefile("rb")
        reply = reader.readline()
    except socket.timeout as exc:
        sock.close()
        raise HandshakeTimeout(f"no handshake reply within {timeout}s") from exc
    except OSError as exc:
        sock.close()
        raise ConnectionRefused(str(exc)) from exc
    text = reply.decode("utf-8", "replace").strip()
    if text != HANDSHAKE_OK:
        sock.close()
        raise HandshakeRejected(f"server replied {text!r}")
    return ProbeSession(sock, reader)


def activate(probe: SkypeProbe, host: str) -> str:
    return probe.activate(host)
