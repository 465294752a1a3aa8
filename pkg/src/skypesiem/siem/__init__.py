"""Miniature SIEM: event normalization, correlation directives, risk, storage, server."""
from .directives import Directive, Policy, Rule, load_directives
from .engine import Alarm, AssetTable, Command, CorrelationEngine, CorrelationResult
from .events import (AGENT_REGEX, PLUGIN_SKYPE_SESSION, PLUGIN_SNORT_ATTACH, NormalizedEvent,
                     normalize, parse_syslog_datetime)
from .risk import RiskParams, compute_risk
from .server import (HANDSHAKE_PREFIX, HANDSHAKE_REPLY, PROBE_PORT, SiemCore, SiemServer,
                     accept_probe_line, build_core, read_status)
from .store import EventStore


def correlate(ev: NormalizedEvent, engine: CorrelationEngine) -> list[CorrelationResult]:
    return engine.process(ev)


def persist(record, store: EventStore) -> int:
    return store.persist(record)


__all__ = [
    "AGENT_REGEX", "Alarm", "AssetTable", "Command", "CorrelationEngine", "CorrelationResult",
    "Directive", "EventStore", "HANDSHAKE_PREFIX", "HANDSHAKE_REPLY", "NormalizedEvent",
    "PLUGIN_SKYPE_SESSION", "PLUGIN_SNORT_ATTACH", "PROBE_PORT", "Policy", "RiskParams", "Rule",
    "SiemCore", "SiemServer", "accept_probe_line", "build_core", "compute_risk", "correlate",
    "load_directives", "normalize", "parse_syslog_datetime", "persist", "read_status",
]
