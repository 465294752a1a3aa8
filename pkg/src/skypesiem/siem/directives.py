"""Correlation directives: XML loading and rule matching.

Element and attribute names follow the OSSIM directive dialect, including
the ``port_form`` spelling (``port_from`` is accepted as an alias). A rule's
sub-rules may be nested directly or inside a ``<rules>`` element; sibling
rules are alternatives, and a directive completes when a leaf rule has
collected its occurrences.
"""
from __future__ import annotations

import ipaddress
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ..errors import DirectiveError
from .events import NormalizedEvent

ANY = "ANY"


def _parse_set(text: str | None, what: str, convert=str) -> frozenset | None:
    """``None`` means ANY."""
    if text is None or text.strip().upper() in ("ANY", ""):
        return None
    try:
        return frozenset(convert(t.strip()) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise DirectiveError(f"bad {what} value {text!r}: {exc}") from None


def _ip(text: str) -> str:
    return str(ipaddress.ip_address(text))


@dataclass
class Policy:
    action: str
    target: str = "userdata1"


@dataclass
class Rule:
    name: str
    type: str = "detector"
    reliability: int = 0
    occurrence: int = 1
    src: frozenset | None = None
    dst: frozenset | None = None
    port_from: frozenset | None = None
    port_to: frozenset | None = None
    plugin_id: int = 0
    plugin_sid: frozenset | None = None
    children: list["Rule"] = field(default_factory=list)

    def matches(self, ev: NormalizedEvent) -> bool:
        if ev.plugin_id != self.plugin_id:
            return False
        if self.plugin_sid is not None and ev.plugin_sid not in self.plugin_sid:
            return False
        src_ip = ev.src_ip if ev.src_ip is not None else ev.userdata_1
        if self.src is not None and src_ip not in self.src:
            return False
        if self.dst is not None and ev.dst_ip not in self.dst:
            return False
        if self.port_from is not None and ev.src_port not in self.port_from:
            return False
        if self.port_to is not None and ev.dst_port not in self.port_to:
            return False
        return True


@dataclass
class Directive:
    id: int
    name: str
    priority: int
    rules: list[Rule]
    policies: list[Policy] = field(default_factory=list)

    def iter_rules(self):
        stack = list(self.rules)
        while stack:
            r = stack.pop()
            yield r
            stack.extend(r.children)


def _int_attr(el: ET.Element, name: str, default=None, lo=None, hi=None) -> int:
    raw = el.get(name)
    if raw is None:
        if default is None:
            raise DirectiveError(f"<{el.tag}> missing attribute {name!r}")
        return default
    try:
        value = int(raw)
    except ValueError:
        raise DirectiveError(f"<{el.tag} {name}={raw!r}> is not an integer") from None
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise DirectiveError(f"<{el.tag} {name}={value}> outside [{lo}, {hi}]")
    return value


def _parse_rule(el: ET.Element) -> Rule:
    port_from = el.get("port_form", el.get("port_from"))
    rule = Rule(
        name=el.get("name", ""),
        type=el.get("type", "detector"),
        reliability=_int_attr(el, "reliability", 0, 0, 10),
        occurrence=_int_attr(el, "occurrence", 1, 1),
        src=_parse_set(el.get("from"), "from", _ip),
        dst=_parse_set(el.get("to"), "to", _ip),
        port_from=_parse_set(port_from, "port_form", int),
        port_to=_parse_set(el.get("port_to"), "port_to", int),
        plugin_id=_int_attr(el, "plugin_id"),
        plugin_sid=_parse_set(el.get("plugin_sid"), "plugin_sid", int),
    )
    for child in el:
        if child.tag == "rule":
            rule.children.append(_parse_rule(child))
        elif child.tag == "rules":
            rule.children.extend(_parse_rule(c) for c in child if c.tag == "rule")
    return rule


def _parse_directive(el: ET.Element) -> Directive:
    rules, policies = [], []
    for child in el:
        if child.tag == "rule":
            rules.append(_parse_rule(child))
        elif child.tag == "rules":
            rules.extend(_parse_rule(c) for c in child if c.tag == "rule")
        elif child.tag == "policy":
            policies.append(Policy(child.get("action", ""), child.get("target", "userdata1")))
    if not rules:
        raise DirectiveError(f"directive {el.get('id')} has no rules")
    return Directive(_int_attr(el, "id"), el.get("name", ""), _int_attr(el, "priority", 0, 0, 5),
                     rules, policies)


def load_directives(xml_text: str) -> list[Directive]:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise DirectiveError(f"directive XML does not parse: {exc}") from None
    elements = [root] if root.tag == "directive" else root.findall("directive")
    directives = [_parse_directive(el) for el in elements]
    ids = [d.id for d in directives]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise DirectiveError(f"duplicate directive id(s): {dupes}")
    return directives
