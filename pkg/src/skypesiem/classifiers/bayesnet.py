"""Discrete Bayesian network classifier learned with K2.

Continuous features are binned with an equal-frequency :class:`Discretizer`.
Nodes are ordered class first, then attributes by decreasing mutual
information with the class. Every attribute starts with the class as its
parent (so ``max_parents=1`` is exactly naive Bayes) and K2 then greedily adds
preceding attributes while the Cooper-Herskovits score improves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..errors import DatasetEmpty, SingleClass
from ..flowkit import FEATURE_NAMES
from ..learnkit import Discretizer, LabeledDataset
from .common import Classifier, normalize_log_rows

CLASS_NODE = 0  # node 0 is the class; node j+1 is feature j


def _config_index(data: np.ndarray, parents: tuple[int, ...], card: list[int]) -> tuple[np.ndarray, int]:
    idx = np.zeros(len(data), dtype=np.int64)
    n_conf = 1
    for p in parents:
        idx = idx * card[p] + data[:, p]
        n_conf *= card[p]
    return idx, n_conf


def family_counts(data: np.ndarray, node: int, parents, card: list[int]) -> np.ndarray:
    """``N[j, k]``: rows with parent configuration ``j`` and ``node`` in state ``k``."""
    parents = tuple(parents)
    idx, n_conf = _config_index(data, parents, card)
    r = card[node]
    flat = np.bincount(idx * r + data[:, node], minlength=n_conf * r)
    return flat.reshape(n_conf, r)


def k2_score(node: int, parents, data: np.ndarray, card: list[int]) -> float:
    """Log Cooper-Herskovits marginal likelihood of ``node`` given ``parents``.

    Uniform Dirichlet prior: ``sum_j [lgamma(r) - lgamma(N_j + r) + sum_k lgamma(N_jk + 1)]``.
    Unobserved parent configurations contribute zero.
    """
    N = family_counts(np.asarray(data), node, parents, card)
    r = card[node]
    Nj = N.sum(axis=1)
    seen = Nj > 0
    return float((gammaln(r) - gammaln(Nj[seen] + r)).sum() + gammaln(N[seen] + 1).sum())


def k2_search(data: np.ndarray, card: list[int], order: list[int], max_parents: int,
              required: dict[int, tuple[int, ...]] | None = None,
              score=k2_score) -> dict[int, tuple[int, ...]]:
    """Greedy K2 parent selection.

    For each node in ``order`` the candidate parents are the nodes before it.
    Starting from ``required[node]`` (default empty) the single best addition
    is taken while it strictly improves the score and the parent count is
    below ``max_parents``. Score ties go to the earliest node in ``order``.
    """
    required = required or {}
    parents: dict[int, tuple[int, ...]] = {}
    for pos, node in enumerate(order):
        current = tuple(required.get(node, ()))
        best_score = score(node, current, data, card)
        candidates = [z for z in order[:pos] if z not in current]
        while len(current) < max_parents and candidates:
            scored = [(score(node, current + (z,), data, card), z) for z in candidates]
            top = max(s for s, _ in scored)
            if top <= best_score:
                break
            z = next(z for s, z in scored if s == top)
            current = current + (z,)
            best_score = top
            candidates.remove(z)
        parents[node] = current
    return parents


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Empirical mutual information (nats) of two integer columns."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    pj = joint / n
    pa = pj.sum(axis=1, keepdims=True)
    pb = pj.sum(axis=0, keepdims=True)
    nz = pj > 0
    return float((pj[nz] * np.log(pj[nz] / (pa @ pb)[nz])).sum())


@dataclass
class CPT:
    parents: tuple[int, ...]
    table: np.ndarray  # (n_parent_configs, cardinality), rows sum to 1


class BayesNetModel(Classifier):
    kind = "bayesnet"

    def __init__(self, order: list[int] | None = None, cpts: dict[int, CPT] | None = None,
                 card: list[int] | None = None, discretizer: Discretizer | None = None,
                 max_parents: int = 3):
        self.order = order
        self.cpts = cpts
        self.card = card
        self.discretizer = discretizer
        self.max_parents = max_parents
        self.trained = cpts is not None and discretizer is not None

    @property
    def parents(self) -> dict[int, tuple[int, ...]]:
        return {n: c.parents for n, c in self.cpts.items()}

    def log_joint(self, rows: np.ndarray) -> np.ndarray:
        """Log joint probability of full node assignments (class in column 0)."""
        rows = np.atleast_2d(rows)
        total = np.zeros(len(rows))
        for node, cpt in sorted(self.cpts.items()):
            idx, _ = _config_index(rows, cpt.parents, self.card)
            total += np.log(cpt.table[idx, rows[:, node]])
        return total

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        D = self.discretizer.transform(np.atleast_2d(np.asarray(X, dtype=float)))
        n = len(D)
        logp = np.empty((n, 2))
        for c in (0, 1):
            rows = np.column_stack([np.full(n, c), D])
            logp[:, c] = self.log_joint(rows)
        return normalize_log_rows(logp)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "node_names": ["class", *FEATURE_NAMES],
            "card": self.card,
            "max_parents": self.max_parents,
            "cpts": {str(n): {"parents": list(c.parents), "table": c.table.tolist()}
                     for n, c in sorted(self.cpts.items())},
            "discretizer": self.discretizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BayesNetModel":
        cpts = {int(k): CPT(tuple(int(p) for p in v["parents"]), np.asarray(v["table"], dtype=float))
                for k, v in d["cpts"].items()}
        return cls([int(x) for x in d["order"]], cpts, [int(c) for c in d["card"]],
                   Discretizer.from_dict(d["discretizer"]), int(d["max_parents"]))


def estimate_cpts(data: np.ndarray, parents: dict[int, tuple[int, ...]], card: list[int]) -> dict[int, CPT]:
    cpts = {}
    for node, pa in parents.items():
        N = family_counts(data, node, pa, card).astype(float)
        cpts[node] = CPT(tuple(pa), (N + 1.0) / (N.sum(axis=1, keepdims=True) + card[node]))
    return cpts


def node_order(data: np.ndarray) -> list[int]:
    """Class first, then attributes by decreasing mutual information with the class."""
    mi = [(-mutual_information(data[:, j], data[:, CLASS_NODE]), j)
          for j in range(1, data.shape[1])]
    return [CLASS_NODE] + [j for _, j in sorted(mi)]


def train_bayesnet(ds: LabeledDataset, max_parents: int = 3, n_bins: int = 10) -> BayesNetModel:
    if len(ds) == 0:
        raise DatasetEmpty("cannot train on an empty dataset")
    if (ds.class_counts() == 0).any():
        raise SingleClass("Bayesian network classifier needs both classes")
    if max_parents < 1:
        raise ValueError("max_parents must be >= 1")
    disc = Discretizer.fit(ds.X, n_bins=n_bins)
    data = np.column_stack([ds.y, disc.transform(ds.X)]).astype(np.int64)
    card = [2, *disc.cardinalities]
    order = node_order(data)
    required = {j: (CLASS_NODE,) for j in range(1, data.shape[1])}
    parents = k2_search(data, card, order, max_parents, required)
    return BayesNetModel(order, estimate_cpts(data, parents, card), card, disc, max_parents)

