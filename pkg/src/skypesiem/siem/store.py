"""Append-only JSON-lines store for events and alarms.

Every record is one line carrying a monotonically increasing ``id`` and a
``kind`` ("event" or "alarm"). Alarm writes are fsync'ed. On open, the log
is replayed; a torn trailing line left by a crash is discarded and
truncated away so later appends start on a clean boundary.
"""
from __future__ import annotations

import json
import logging
import os
import threading

from ..errors import StoreFailure
from .engine import Alarm
from .events import NormalizedEvent

logger = logging.getLogger(__name__)


class EventStore:
    def __init__(self, path=None):
        """``path=None`` keeps records in memory only."""
        self.path = os.fspath(path) if path is not None else None
        self.records: list[dict] = []
        self.failed = False
        self._lock = threading.Lock()
        self._fh = None
        if self.path is None:
            return
        self._replay()
        try:
            self._fh = open(self.path, "a", encoding="utf-8")
        except OSError as exc:
            raise StoreFailure(f"cannot open store {self.path}: {exc}") from exc

    def _replay(self) -> None:
        if not os.path.exists(self.path):
            return
        good_bytes = 0
        with open(self.path, "rb") as fh:
            for raw in fh:
                if not raw.endswith(b"\n"):
                    break
                try:
                    rec = json.loads(raw)
                except ValueError:
                    break
                self.records.append(rec)
                good_bytes += len(raw)
        if good_bytes != os.path.getsize(self.path):
            logger.warning("store %s: discarding %d torn trailing bytes", self.path,
                           os.path.getsize(self.path) - good_bytes)
            with open(self.path, "r+b") as fh:
                fh.truncate(good_bytes)

    @property
    def next_id(self) -> int:
        return (self.records[-1]["id"] + 1) if self.records else 1

    def persist(self, record) -> int:
        """Append an event or alarm; returns its id. Raises :class:`StoreFailure` (fail-stop)."""
        with self._lock:
            if self.failed:
                raise StoreFailure("store has failed; refusing further writes")
            if isinstance(record, NormalizedEvent):
                kind, body = "event", record.to_dict()
            elif isinstance(record, Alarm):
                kind, body = "alarm", record.to_dict()
            else:
                kind, body = record.get("kind", "record"), dict(record)
            rid = self.next_id
            body.update(id=rid, kind=kind)
            line = json.dumps(body, sort_keys=True, default=str) + "\n"
            try:
                if self._fh is None:
                    self.records.append(body)
                    return self._assign(record, rid)
                self._fh.write(line)
                self._fh.flush()
                if kind == "alarm":
                    os.fsync(self._fh.fileno())
            except OSError as exc:
                self.failed = True
                raise StoreFailure(f"write failed: {exc}") from exc
            self.records.append(body)
            return self._assign(record, rid)

    @staticmethod
    def _assign(record, rid: int) -> int:
        if hasattr(record, "id"):
            record.id = rid
        return rid

    def events(self) -> list[NormalizedEvent]:
        return [NormalizedEvent.from_dict(r) for r in self.records if r["kind"] == "event"]

    def alarms(self) -> list[Alarm]:
        return [Alarm.from_dict(r) for r in self.records if r["kind"] == "alarm"]

    def snapshot(self) -> list[dict]:
        with self._lock:
            return list(self.records)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None and not self._fh.closed:
                self._fh.close()

