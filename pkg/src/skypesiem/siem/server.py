"""SIEM runtime: the serialized processing core plus its network listeners.

:class:`SiemCore` is the single logical consumer (normalize, persist,
correlate, persist alarms, dispatch policy commands). :class:`SiemServer`
feeds it from TCP probe sessions on port 40001, UDP syslog, and tailed
files, and serves a plain-text counter dump on an admin port.
"""
from __future__ import annotations

import logging
import os
import queue
import socket
import socketserver
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

from ..errors import MalformedHandshake, NormalizationFailed, StoreFailure
from .engine import AssetTable, Command, CorrelationEngine, CorrelationResult
from .events import normalize
from .store import EventStore

logger = logging.getLogger(__name__)

PROBE_PORT = 40001
HANDSHAKE_PREFIX = 'Connect id="1"'
HANDSHAKE_REPLY = "Ok id=1"


def accept_probe_line(line: str) -> str:
    """Reply to a probe's first line, or raise :class:`MalformedHandshake`."""
    if not line.strip().startswith(HANDSHAKE_PREFIX):
        raise MalformedHandshake(f"unexpected handshake {line.strip()[:80]!r}")
    return HANDSHAKE_REPLY


@dataclass
class ProcessOutcome:
    event_id: int | None
    results: list[CorrelationResult] = field(default_factory=list)
    error: str | None = None


class SiemCore:
    def __init__(self, engine: CorrelationEngine, store: EventStore | None = None):
        self.engine = engine
        self.store = store if store is not None else EventStore()
        self.counters: Counter = Counter()
        self.alarms = []
        self.commands_sent: list[str] = []
        self.stopped = False
        self._lock = threading.Lock()
        self._probe_sinks: list = []  # callables taking a command line
        self.counters["records_replayed"] = len(self.store.records)
        self.counters["alarms_replayed"] = sum(1 for r in self.store.records if r.get("kind") == "alarm")

    def attach_probe(self, send) -> None:
        with self._lock:
            self._probe_sinks.append(send)

    def detach_probe(self, send) -> None:
        with self._lock:
            if send in self._probe_sinks:
                self._probe_sinks.remove(send)

    def process_line(self, raw: str, sensor: str = "") -> ProcessOutcome:
        with self._lock:
            if self.stopped:
                self.counters["rejected_stopped"] += 1
                return ProcessOutcome(None, error="stopped")
            self.counters["lines_received"] += 1
            try:
                ev = normalize(raw, sensor=sensor)
            except NormalizationFailed as exc:
                self.counters["normalization_failed"] += 1
                logger.debug("dropped line: %s", exc)
                return ProcessOutcome(None, error=str(exc))
            try:
                self.store.persist(ev)
                self.counters["events"] += 1
                results = self.engine.process(ev)
                for res in results:
                    self.store.persist(res.alarm)
                    self.alarms.append(res.alarm)
                    self.counters["alarms"] += 1
            except StoreFailure:
                self.stopped = True
                self.counters["store_failures"] += 1
                logger.error("store failure; SIEM stops accepting events")
                raise
            sinks = list(self._probe_sinks)
        for res in results:
            for cmd in res.commands:
                self._dispatch(cmd, sinks)
        return ProcessOutcome(ev.id, results)

    def _dispatch(self, cmd: Command, sinks) -> None:
        line = cmd.line()
        self.commands_sent.append(line)
        self.counters["commands_sent"] += 1
        for send in sinks:
            try:
                send(line)
            except OSError as exc:
                logger.warning("probe unreachable for %r: %s", line, exc)

    def status_text(self) -> str:
        with self._lock:
            items = sorted(self.counters.items())
        return "".join(f"{k} {v}\n" for k, v in items)


class _ProbeHandler(socketserver.StreamRequestHandler):
    def handle(self):
        server: SiemServer = self.server.siem
        first = self.rfile.readline(4096).decode("utf-8", "replace")
        try:
            reply = accept_probe_line(first)
        except MalformedHandshake:
            server.core.counters["handshakes_rejected"] += 1
            return
        wlock = threading.Lock()

        def send(line: str) -> None:
            with wlock:
                self.wfile.write((line + "\n").encode())
                self.wfile.flush()

        send(reply)
        server.core.counters["probe_sessions"] += 1
        server.core.attach_probe(send)
        try:
            for raw in self.rfile:
                line = raw.decode("utf-8", "replace").strip()
                if not line or line == "OK":
                    continue
                # probes may also push syslog lines over the control channel
                server.submit(line, self.client_address[0])
        except OSError:
            pass
        finally:
            server.core.detach_probe(send)


class _UdpHandler(socketserver.BaseRequestHandler):
    def handle(self):
        data = self.request[0]
        for line in data.decode("utf-8", "replace").splitlines():
            if line.strip():
                self.server.siem.submit(line, self.client_address[0])


class _AdminHandler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.sendall(self.server.siem.core.status_text().encode())


class _TCP(socketserver.ThreadingMixIn, socketserver.TCPServer):
    allow_reuse_address = True
    daemon_threads = True


class _UDP(socketserver.ThreadingMixIn, socketserver.UDPServer):
    allow_reuse_address = True
    daemon_threads = True


class SiemServer:
    """Network front end. Ports of 0 pick ephemeral ports; ``None`` disables a listener."""

    def __init__(self, core: SiemCore, host: str = "127.0.0.1", probe_port: int | None = PROBE_PORT,
                 syslog_port: int | None = None, admin_port: int | None = None,
                 tail_files: list | None = None):
        self.core = core
        self.host = host
        self._queue: queue.Queue = queue.Queue()
        self._servers = []
        self._threads = []
        self._stop = threading.Event()
        self.probe_addr = self._listen(_TCP, _ProbeHandler, probe_port)
        self.syslog_addr = self._listen(_UDP, _UdpHandler, syslog_port)
        self.admin_addr = self._listen(_TCP, _AdminHandler, admin_port)
        self.tail_files = list(tail_files or [])

    def _listen(self, cls, handler, port):
        if port is None:
            return None
        srv = cls((self.host, port), handler)
        srv.siem = self
        self._servers.append(srv)
        return srv.server_address

    def submit(self, line: str, sensor: str = "") -> None:
        self._queue.put((line, sensor))

    def _consume(self) -> None:
        while not self._stop.is_set():
            try:
                line, sensor = self._queue.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.core.process_line(line, sensor)
            except StoreFailure:
                pass
            finally:
                self._queue.task_done()

    def _tail(self, path) -> None:
        pos = 0
        while not self._stop.is_set():
            try:
                size = os.path.getsize(path)
            except OSError:
                time.sleep(0.1)
                continue
            if size < pos:
                pos = 0
            if size > pos:
                with open(path, "r", encoding="utf-8", errors="replace") as fh:
                    fh.seek(pos)
                    chunk = fh.read()
                complete, _, _rest = chunk.rpartition("\n")
                if complete or chunk.endswith("\n"):
                    for line in complete.splitlines():
                        if line.strip():
                            self.submit(line, "file")
                    pos += len(complete.encode()) + 1
            time.sleep(0.05)

    def start(self) -> "SiemServer":
        for srv in self._servers:
            t = threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
            t.start()
            self._threads.append(t)
        t = threading.Thread(target=self._consume, daemon=True)
        t.start()
        self._threads.append(t)
        for path in self.tail_files:
            t = threading.Thread(target=self._tail, args=(path,), daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def drain(self, timeout: float = 5.0) -> None:
        """Block until every submitted line has been processed."""
        deadline = time.monotonic() + timeout
        while self._queue.unfinished_tasks and time.monotonic() < deadline:
            time.sleep(0.01)

    def stop(self) -> None:
        self._stop.set()
        for srv in self._servers:
            srv.shutdown()
            srv.server_close()
        for t in self._threads:
            t.join(timeout=2)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def read_status(host: str, port: int, timeout: float = 2.0) -> dict[str, int]:
    with socket.create_connection((host, port), timeout=timeout) as s:
        chunks = []
        while True:
            b = s.recv(4096)
            if not b:
                break
            chunks.append(b)
    out = {}
    for line in b"".join(chunks).decode().splitlines():
        k, _, v = line.partition(" ")
        out[k] = int(v)
    return out


def build_core(directives, assets: AssetTable | None = None, r_th: float = 1.0,
               store_path=None) -> SiemCore:
    return SiemCore(CorrelationEngine(directives, assets, r_th), EventStore(store_path))
