"""Correlation engine: directive state machines, alarms and policies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .directives import Directive, Rule
from .events import NormalizedEvent
from .risk import RiskParams, compute_risk

logger = logging.getLogger(__name__)

DEFAULT_ASSET = 2
INSTANCE_TTL = timedelta(minutes=10)


class AssetTable:
    """ip -> asset value (0-5). Text format: ``<ip> <value>`` per line, ``default <value>``."""

    def __init__(self, values: dict[str, int] | None = None, default: int = DEFAULT_ASSET):
        self.values = dict(values or {})
        self.default = default

    def value(self, ip: str | None) -> int:
        return self.values.get(ip, self.default) if ip else self.default

    @classmethod
    def parse(cls, text: str) -> "AssetTable":
        values, default = {}, DEFAULT_ASSET
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"asset table line {lineno}: expected '<ip> <value>'")
            v = int(parts[1])
            if not 0 <= v <= 5:
                raise ValueError(f"asset table line {lineno}: value {v} outside [0, 5]")
            if parts[0].lower() == "default":
                default = v
            else:
                values[parts[0]] = v
        return cls(values, default)


@dataclass
class Alarm:
    directive_id: int
    directive_name: str
    risk: float
    params: RiskParams
    event_ids: list
    created_at: datetime | None
    host: str | None = None
    id: int | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id, "directive_id": self.directive_id, "directive_name": self.directive_name,
            "risk": self.risk, "asset_value": self.params.asset_value,
            "event_priority": self.params.event_priority,
            "event_reliability": self.params.event_reliability,
            "event_ids": list(self.event_ids),
            "created_at": self.created_at.isoformat() if self.created_at else None,
            "host": self.host,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Alarm":
        return cls(int(d["directive_id"]), d.get("directive_name", ""), float(d["risk"]),
                   RiskParams(d["asset_value"], d["event_priority"], d["event_reliability"]),
                   list(d.get("event_ids", [])),
                   datetime.fromisoformat(d["created_at"]) if d.get("created_at") else None,
                   d.get("host"), d.get("id"))


@dataclass
class Command:
    """An outbound policy action, e.g. ``ACTIVATE 192.168.1.200`` to connected probes."""
    verb: str
    argument: str

    def line(self) -> str:
        return f"{self.verb} {self.argument}"


@dataclass
class CorrelationResult:
    alarm: Alarm
    commands: list[Command] = field(default_factory=list)


@dataclass
class _Instance:
    directive: Directive
    rule: Rule
    pending: list[Rule]  # rules that can match next (the current rule until its occurrences are met)
    count: int
    events: list
    started: datetime
    last_rule: Rule


def _event_time(ev: NormalizedEvent) -> datetime:
    if ev.date is None:
        return datetime.now(timezone.utc)
    return ev.date if ev.date.tzinfo else ev.date.replace(tzinfo=timezone.utc)


class CorrelationEngine:
    """Single-consumer correlation pipeline.

    Each event is offered to the live instances of every directive (oldest
    first); an instance that takes the event counts an occurrence on its
    current rule and, once the rule's occurrence is reached, moves on to the
    rule's children. An event no instance takes may open a new instance if it
    matches a root rule. Completing a leaf emits an :class:`Alarm` whose risk
    uses the directive priority and the last matched rule's reliability.
    """

    def __init__(self, directives: list[Directive], assets: AssetTable | None = None,
                 r_th: float = 1.0, ttl: timedelta = INSTANCE_TTL):
        self.directives = list(directives)
        self.assets = assets or AssetTable()
        self.r_th = r_th
        self.ttl = ttl
        self._instances: dict[int, list[_Instance]] = {d.id: [] for d in self.directives}

    def reset(self) -> None:
        for v in self._instances.values():
            v.clear()

    def process(self, ev: NormalizedEvent) -> list[CorrelationResult]:
        now = _event_time(ev)
        results = []
        for d in self.directives:
            live = [i for i in self._instances[d.id] if now - i.started <= self.ttl]
            self._instances[d.id] = live
            taken = False
            for inst in live:
                rule = next((r for r in inst.pending if r.matches(ev)), None)
                if rule is None:
                    continue
                taken = True
                self._advance(inst, rule, ev, results)
                break
            if not taken:
                root = next((r for r in d.rules if r.matches(ev)), None)
                if root is not None:
                    inst = _Instance(d, root, [root], 0, [], now, root)
                    live.append(inst)
                    self._advance(inst, root, ev, results)
            self._instances[d.id] = [i for i in live if i.pending]
        return results

    def _advance(self, inst: _Instance, rule: Rule, ev: NormalizedEvent, results: list) -> None:
        if rule is not inst.rule:
            inst.rule, inst.count = rule, 0
        inst.count += 1
        inst.events.append(ev.id)
        inst.last_rule = rule
        inst.pending = [rule]
        if inst.count < rule.occurrence:
            return
        if rule.children:
            inst.pending = list(rule.children)
            inst.rule, inst.count = None, 0
            return
        inst.pending = []
        results.append(self._complete(inst, ev))

    def _complete(self, inst: _Instance, ev: NormalizedEvent) -> CorrelationResult:
        d = inst.directive
        host = ev.src_ip or ev.userdata_1
        params = RiskParams(self.assets.value(host), d.priority, inst.last_rule.reliability)
        alarm = Alarm(d.id, d.name, compute_risk(params), params, list(inst.events), ev.date, host)
        result = CorrelationResult(alarm)
        if alarm.risk >= self.r_th:
            for pol in d.policies:
                if pol.action == "activate_probe":
                    target = ev.userdata_1 if pol.target == "userdata1" else getattr(ev, pol.target, None)
                    if target:
                        result.commands.append(Command("ACTIVATE", target))
        logger.info("alarm directive=%s risk=%s host=%s", d.id, alarm.risk, host)
        return result
