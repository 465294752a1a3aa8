"""C4.5-style decision tree on continuous attributes.

Splits are binary (``A <= t`` / ``A > t``) at midpoints between adjacent
distinct values; the split with the highest gain ratio wins, ties going to
the lowest attribute index and then the lowest threshold. No post-pruning.
The protocol indicator is handled like any other attribute: its only
candidate threshold is 0.5, i.e. a TCP/UDP test.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from ..errors import DatasetEmpty, EmptySet
from ..learnkit import LabeledDataset
from .common import Classifier

logger = logging.getLogger(__name__)

# relative slack when comparing gain ratios; absorbs summation-order noise
TIE_EPS = 1e-12


def entropy(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=float)
    if (counts < 0).any():
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise EmptySet("entropy of an empty set")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum() + 0.0)


class SplitGain(NamedTuple):
    gain: float
    gain_ratio: float


def information_gain(X, y, attribute: int, threshold: float | None = None) -> SplitGain:
    """Gain and gain ratio of splitting ``(X, y)`` at ``X[:, attribute] <= threshold``.

    Also callable as ``information_gain(dataset, attribute, threshold)``.
    Degenerate splits (one side empty) score zero on both.
    """
    if isinstance(X, LabeledDataset):
        X, y, attribute, threshold = X.X, X.y, y, attribute
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    left = X[:, attribute] <= threshold
    n = len(y)
    n_left = int(left.sum())
    if n_left == 0 or n_left == n:
        return SplitGain(0.0, 0.0)
    h = entropy(np.bincount(y, minlength=2))
    cl = np.bincount(y[left], minlength=2)
    cr = np.bincount(y[~left], minlength=2)
    wl, wr = n_left / n, (n - n_left) / n
    gain = h - wl * entropy(cl) - wr * entropy(cr)
    split_info = entropy([n_left, n - n_left])
    return SplitGain(gain, gain / split_info)


@dataclass(frozen=True)
class Leaf:
    counts: tuple[int, int]  # (skype, normal) training counts

    @property
    def distribution(self) -> tuple[float, float]:
        n = self.counts[0] + self.counts[1]
        return ((self.counts[0] + 1) / (n + 2), (self.counts[1] + 1) / (n + 2))


@dataclass(frozen=True)
class Split:
    attribute: int
    threshold: float
    left: "Node"   # A <= t
    right: "Node"  # A > t
    gain: float
    gain_ratio: float
    counts: tuple[int, int]


Node = Union[Leaf, Split]


def _binary_entropy_rows(c0: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Entropy (bits) of two-class count rows ``(c0, n - c0)``; vectorised."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = c0 / n
        q = 1.0 - p
        t0 = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        t1 = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return t0 + t1


def best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float, float, float] | None:
    """Return ``(attribute, threshold, gain, gain_ratio)`` of the best split, or None."""
    n = len(y)
    h = entropy(np.bincount(y, minlength=2))
    best = None
    for a in range(X.shape[1]):
        order = np.argsort(X[:, a], kind="stable")
        xs = X[order, a]
        skype = (y[order] == 0).astype(float)
        # boundaries between adjacent distinct values
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        n_left = (cut + 1).astype(float)
        s_left = np.cumsum(skype)[cut]
        n_right = n - n_left
        s_right = skype.sum() - s_left
        cond = (n_left * _binary_entropy_rows(s_left, n_left)
                + n_right * _binary_entropy_rows(s_right, n_right)) / n
        gain = h - cond
        split_info = _binary_entropy_rows(n_left, np.full_like(n_left, n))
        ratio = gain / split_info
        top = ratio.max()
        i = int(np.flatnonzero(ratio >= top - abs(top) * TIE_EPS - TIE_EPS)[0])
        r = float(ratio[i])
        if best is None or r > best[3] * (1 + TIE_EPS) + TIE_EPS:
            thr = float((xs[cut[i]] + xs[cut[i] + 1]) / 2.0)
            best = (a, thr, float(gain[i]), r)
    return best


def _grow(X: np.ndarray, y: np.ndarray, min_leaf: int, depth: int, max_depth: int | None) -> Node:
    counts = np.bincount(y, minlength=2)
    ctuple = (int(counts[0]), int(counts[1]))
    if counts.min() == 0 or len(y) < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
        return Leaf(ctuple)
    found = best_split(X, y)
    if found is None or found[3] <= 0:
        return Leaf(ctuple)
    a, t, gain, ratio = found
    left = X[:, a] <= t
    return Split(a, t,
                 _grow(X[left], y[left], min_leaf, depth + 1, max_depth),
                 _grow(X[~left], y[~left], min_leaf, depth + 1, max_depth),
                 gain, ratio, ctuple)


class TreeModel(Classifier):
    kind = "tree"

    def __init__(self, root: Node | None = None, min_leaf: int = 2, degenerate: bool = False):
        self.root = root
        self.min_leaf = min_leaf
        self.degenerate = degenerate
        self.trained = root is not None

    def leaf_for(self, x: np.ndarray) -> Leaf:
        node = self.root
        while isinstance(node, Split):
            node = node.left if x[node.attribute] <= node.threshold else node.right
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.leaf_for(x).distribution for x in X], dtype=float).reshape(-1, 2)

    @property
    def depth(self) -> int:
        def d(node):
            return 0 if isinstance(node, Leaf) else 1 + max(d(node.left), d(node.right))
        return d(self.root)

    @property
    def n_leaves(self) -> int:
        def c(node):
            return 1 if isinstance(node, Leaf) else c(node.left) + c(node.right)
        return c(self.root)

    def to_dict(self) -> dict:
        def enc(node):
            if isinstance(node, Leaf):
                return {"leaf": list(node.counts)}
            return {"attribute": node.attribute, "threshold": node.threshold,
                    "gain": node.gain, "gain_ratio": node.gain_ratio,
                    "counts": list(node.counts),
                    "le": enc(node.left), "gt": enc(node.right)}
        return {"min_leaf": self.min_leaf, "degenerate": self.degenerate, "root": enc(self.root)}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        def dec(n):
            if "leaf" in n:
                return Leaf(tuple(int(c) for c in n["leaf"]))
            return Split(int(n["attribute"]), float(n["threshold"]), dec(n["le"]), dec(n["gt"]),
                         float(n["gain"]), float(n["gain_ratio"]), tuple(int(c) for c in n["counts"]))
        return cls(dec(d["root"]), int(d["min_leaf"]), bool(d["degenerate"]))

    def describe(self, names=None) -> str:
        lines = []

        def walk(node, indent):
            pad = "|   " * indent
            if isinstance(node, Leaf):
                return
            name = names[node.attribute] if names else f"x{node.attribute}"
            for op, child in (("<=", node.left), (">", node.right)):
                if isinstance(child, Leaf):
                    lab = "Skype" if child.counts[0] > child.counts[1] else "Normal"
                    lines.append(f"{pad}{name} {op} {node.threshold:g}: {lab} {child.counts}")
                else:
                    lines.append(f"{pad}{name} {op} {node.threshold:g}")
                    walk(child, indent + 1)
        if isinstance(self.root, Leaf):
            return f": {self.root.counts}"
        walk(self.root, 0)
        return "\n".join(lines)


def train_tree(ds: LabeledDataset, min_leaf: int = 2, max_depth: int | None = None) -> TreeModel:
    if len(ds) == 0:
        raise DatasetEmpty("cannot train on an empty dataset")
    counts = ds.class_counts()
    if (counts == 0).any():
        logger.warning("single-class training data; returning a one-leaf tree")
        return TreeModel(Leaf((int(counts[0]), int(counts[1]))), min_leaf, degenerate=True)
    return TreeModel(_grow(ds.X, ds.y, min_leaf, 0, max_depth), min_leaf)
