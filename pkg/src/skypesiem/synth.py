"""Synthetic traffic: labeled feature corpora and packet captures.

Skype-like flows use small packets (60-160 B) at short intervals
(10-40 ms); Normal-like flows use 200-1500 B packets with 1-5000 ms gaps.
Everything is driven by an explicit seed.
"""
from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from .flowkit import TCP, UDP, FlowKey, FlowRecord, PacketMeta, extract_features, header_size
from .learnkit import NORMAL, SKYPE, LabeledDataset

SKYPE_LEN = (60, 160)
SKYPE_IAT_MS = (10.0, 40.0)
NORMAL_LEN = (200, 1500)
NORMAL_IAT_MS = (1.0, 5000.0)
PAPER_CORPUS_SIZE = 1292

LOGIN_REQUEST = b"GET http://conn.skype.com/ HTTP/1.1\r\nHost: conn.skype.com\r\n\r\n"


def _profile(label: int):
    return (SKYPE_LEN, SKYPE_IAT_MS, 0.8) if label == SKYPE else (NORMAL_LEN, NORMAL_IAT_MS, 0.3)


def synthetic_flow(rng: np.random.Generator, label: int, n_packets: int | None = None,
                   start_us: int = 0) -> FlowRecord:
    (lo, hi), (ilo, ihi), p_udp = _profile(label)
    n = int(n_packets if n_packets is not None else rng.integers(4, 41))
    proto = UDP if rng.random() < p_udp else TCP
    lengths = rng.integers(lo, hi + 1, size=n).tolist()
    iats_us = np.round(rng.uniform(ilo, ihi, size=n - 1) * 1000).astype(np.int64)
    key = FlowKey(proto, ("10.0.0.1", 40000), ("10.0.0.2", 50000))
    ts = start_us + np.r_[0, np.cumsum(iats_us)]
    return FlowRecord(key, int(ts[0]), int(ts[-1]), [int(x) for x in lengths],
                      (iats_us / 1000.0).tolist())


def synthetic_corpus(n: int = PAPER_CORPUS_SIZE, seed: int = 0, skype_fraction: float = 0.5) -> LabeledDataset:
    """``n`` labeled feature vectors from the two separated generators."""
    rng = np.random.default_rng(seed)
    n_skype = int(round(n * skype_fraction))
    labels = np.array([SKYPE] * n_skype + [NORMAL] * (n - n_skype))
    rng.shuffle(labels)
    X = np.array([extract_features(synthetic_flow(rng, int(c))).as_array() for c in labels])
    return LabeledDataset(X.reshape(-1, 9), labels)


def _payload(rng: np.random.Generator, proto: str, length: int) -> bytes:
    return rng.integers(0, 256, size=max(0, length - header_size(proto)), dtype=np.uint8).tobytes()


def flow_packets(rng: np.random.Generator, label: int, client: str, server: str,
                 client_port: int, server_port: int, start_us: int, n_packets: int = 20,
                 proto: str | None = None) -> list[PacketMeta]:
    """Packets of one bidirectional flow, alternating direction."""
    (lo, hi), (ilo, ihi), p_udp = _profile(label)
    if proto is None:
        proto = UDP if rng.random() < p_udp else TCP
    ts = start_us
    out = []
    for i in range(n_packets):
        if i:
            ts += int(round(rng.uniform(ilo, ihi) * 1000))
        length = int(rng.integers(max(lo, header_size(proto)), hi + 1))
        fwd = i % 2 == 0
        out.append(PacketMeta(ts, client if fwd else server, server if fwd else client,
                              client_port if fwd else server_port,
                              server_port if fwd else client_port,
                              proto, length, _payload(rng, proto, length)))
    return out


def _merge(*streams: list[PacketMeta]) -> list[PacketMeta]:
    merged = [p for s in streams for p in s]
    merged.sort(key=lambda p: p.timestamp)
    return merged


def to_micros(when: datetime | str) -> int:
    if isinstance(when, str):
        when = datetime.fromisoformat(when)
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return int(round(when.timestamp() * 1_000_000))


def login_capture(host: str, start_us: int, server: str = "91.190.216.21",
                  with_udp_probe: bool = False, seed: int = 0) -> list[PacketMeta]:
    """A host fetching ``conn.skype.com`` over TCP port 80 (plus optional UDP super-node probe)."""
    rng = np.random.default_rng(seed)
    sport = 51000
    pkts = [
        PacketMeta(start_us, host, server, sport, 80, TCP, 40),
        PacketMeta(start_us + 30_000, server, host, 80, sport, TCP, 40),
        PacketMeta(start_us + 60_000, host, server, sport, 80, TCP, 40 + len(LOGIN_REQUEST), LOGIN_REQUEST),
        PacketMeta(start_us + 120_000, server, host, 80, sport, TCP, 40 + 200, _payload(rng, TCP, 240)),
    ]
    if with_udp_probe:
        body = bytearray(rng.integers(0, 256, size=30, dtype=np.uint8).tobytes())
        body[12] = 0x02
        pkts.append(PacketMeta(start_us + 200_000, host, "157.55.130.150", 33033, 40001, UDP,
                               28 + len(body), bytes(body)))
    return pkts


def session_capture(host: str, start_us: int, n_flows: int = 10, label: int = SKYPE,
                    n_packets: int = 20, seed: int = 0,
                    background_hosts: tuple[str, ...] = ()) -> list[PacketMeta]:
    """``n_flows`` flows of one profile between ``host`` and distinct peers.

    ``background_hosts`` each get the same number of flows of the other
    profile, to exercise host gating.
    """
    rng = np.random.default_rng(seed)
    streams = []
    for i in range(n_flows):
        peer = f"198.51.100.{10 + i}"
        streams.append(flow_packets(rng, label, host, peer, 20000 + i, 33033,
                                    start_us + i * 1_000_000, n_packets))
    other = NORMAL if label == SKYPE else SKYPE
    for h, bg in enumerate(background_hosts):
        for i in range(n_flows):
            peer = f"203.0.113.{10 + i}"
            streams.append(flow_packets(rng, other, bg, peer, 30000 + i, 443,
                                        start_us + i * 1_000_000 + 500_000 + h, n_packets))
    return _merge(*streams)
