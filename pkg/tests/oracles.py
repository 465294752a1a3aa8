"""Reference implementations used as test oracles.

Each one is written the slow, obvious way in plain Python and shares no
code with the library.
"""
from __future__ import annotations

import itertools
import math
import struct
from collections import Counter
from fractions import Fraction


def entropy_bits(counts) -> float:
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def split_scores(rows, labels, attr, thr):
    """(gain, gain_ratio) of ``rows[attr] <= thr`` by direct counting."""
    left = [lab for r, lab in zip(rows, labels) if r[attr] <= thr]
    right = [lab for r, lab in zip(rows, labels) if r[attr] > thr]
    n = len(labels)
    if not left or not right:
        return 0.0, 0.0

    def h(ls):
        c = Counter(ls)
        return entropy_bits([c[0], c[1]])

    gain = h(labels) - len(left) / n * h(left) - len(right) / n * h(right)
    split = entropy_bits([len(left), len(right)])
    return gain, gain / split


def brute_force_root(rows, labels, rel=1e-9):
    """Best (attribute, threshold) by gain ratio; ties to lowest attribute, then lowest threshold.

    Returns None when no split has positive gain ratio.
    """
    best = None
    for a in range(len(rows[0])):
        values = sorted(set(r[a] for r in rows))
        for lo, hi in zip(values, values[1:]):
            t = (lo + hi) / 2.0
            _, ratio = split_scores(rows, labels, a, t)
            if best is None or ratio > best[2] + rel * max(1.0, abs(best[2])):
                best = (a, t, ratio)
    if best is None or best[2] <= 0:
        return None
    return best


def wilcoxon_auc(labels, scores, positive=0) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties count one half."""
    pos = [s for s, y in zip(scores, labels) if y == positive]
    neg = [s for s, y in zip(scores, labels) if y != positive]
    wins = Fraction(0)
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                wins += Fraction(1, 2)
    return float(wins / (len(pos) * len(neg)))


def log_ch_score(column, parent_columns, r_node, parent_cards) -> float:
    """Cooper-Herskovits log score from explicit (configuration, value) counts."""
    joint = Counter()
    per_config = Counter()
    for i, v in enumerate(column):
        config = tuple(pc[i] for pc in parent_columns)
        joint[config, v] += 1
        per_config[config] += 1
    total = 0.0
    for config, n_j in per_config.items():
        total += math.lgamma(r_node) - math.lgamma(n_j + r_node)
        total += sum(math.lgamma(joint[config, k] + 1) for k in range(r_node))
    return total


def exhaustive_best_parents(data, card, node, predecessors, max_parents):
    """All subsets of ``predecessors`` up to ``max_parents``; returns (best set, best, runner-up)."""
    scored = []
    for k in range(0, min(max_parents, len(predecessors)) + 1):
        for subset in itertools.combinations(predecessors, k):
            s = log_ch_score([row[node] for row in data], [[row[p] for row in data] for p in subset],
                             card[node], [card[p] for p in subset])
            scored.append((s, frozenset(subset)))
    scored.sort(key=lambda t: -t[0])
    runner_up = scored[1][0] if len(scored) > 1 else -math.inf
    return scored[0][1], scored[0][0], runner_up


def central_difference(f, x, h=1e-5):
    g = []
    for i in range(len(x)):
        up = list(x)
        dn = list(x)
        up[i] += h
        dn[i] -= h
        g.append((f(up) - f(dn)) / (2 * h))
    return g


def mode_label(labels) -> int:
    """Majority of three 0/1 labels."""
    return 0 if sum(1 for v in labels if v == 0) >= 2 else 1


def risk_exact(asset, priority, reliability) -> Fraction:
    return Fraction(asset * priority * reliability, 25)


# -- pcap bytes built by hand ------------------------------------------------

def ipv4_bytes(a: str) -> bytes:
    return bytes(int(x) for x in a.split("."))


def hand_udp_frame(src, dst, sport, dport, total_len) -> bytes:
    payload = bytes(total_len - 28)
    udp = struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total_len, 0, 0, 64, 17, 0,
                     ipv4_bytes(src), ipv4_bytes(dst))
    eth = b"\x00\x11\x22\x33\x44\x55" + b"\x66\x77\x88\x99\xaa\xbb" + b"\x08\x00"
    return eth + ip + udp


def hand_arp_frame() -> bytes:
    eth = b"\xff" * 6 + b"\x66\x77\x88\x99\xaa\xbb" + b"\x08\x06"
    return eth + bytes(28)


def hand_pcap(frames_with_ts, big_endian=False) -> bytes:
    e = ">" if big_endian else "<"
    out = struct.pack(e + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)
    for ts_us, frame in frames_with_ts:
        out += struct.pack(e + "IIII", ts_us // 1_000_000, ts_us % 1_000_000, len(frame), len(frame))
        out += frame
    return out


def greedy_margin(data, card, node, predecessors, max_parents):
    """Smallest score gap met along the greedy path for ``node``.

    At each step the gap between the best and second-best addition and
    between the best addition and stopping are both recorded; a tiny
    minimum means the greedy path depends on a near tie.
    """
    column = [row[node] for row in data]

    def score(subset):
        return log_ch_score(column, [[row[p] for row in data] for p in subset],
                            card[node], [card[p] for p in subset])

    current = ()
    here = score(current)
    margin = math.inf
    remaining = list(predecessors)
    while remaining and len(current) < max_parents:
        scored = sorted((score(current + (z,)), z) for z in remaining)
        top, z = scored[-1]
        if len(scored) > 1:
            margin = min(margin, top - scored[-2][0])
        margin = min(margin, abs(top - here))
        if top <= here:
            break
        current += (z,)
        here = top
        remaining.remove(z)
    return margin


def random_network_data(rng, n_lo=300, n_hi=1000):
    """Samples from a random DAG over 2-4 nodes (parents precede children) with Dirichlet(0.5) CPTs."""
    k = int(rng.integers(2, 5))
    card = [int(c) for c in rng.integers(2, 4, size=k)]
    n = int(rng.integers(n_lo, n_hi + 1))
    data = [[0] * k for _ in range(n)]
    for j in range(k):
        parents = [p for p in range(j) if rng.random() < 0.5]
        n_conf = 1
        for p in parents:
            n_conf *= card[p]
        cpt = rng.dirichlet([0.5] * card[j], size=n_conf)
        for row in data:
            config = 0
            for p in parents:
                config = config * card[p] + row[p]
            row[j] = int(rng.choice(card[j], p=cpt[config]))
    return data, card


def greedy_parents(data, card, node, predecessors, max_parents):
    """Plain K2 greedy path: add the best single predecessor while the score strictly improves."""
    column = [row[node] for row in data]

    def score(subset):
        return log_ch_score(column, [[row[p] for row in data] for p in subset],
                            card[node], [card[p] for p in subset])

    current, here = (), score(())
    remaining = list(predecessors)
    while remaining and len(current) < max_parents:
        top, z = max((score(current + (z,)), -z) for z in remaining)
        if top <= here:
            break
        current += (-z,)
        here = top
        remaining.remove(-z)
    return frozenset(current), here
