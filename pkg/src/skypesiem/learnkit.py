"""Labeled datasets, stratified splitting, standardization and discretization."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetEmpty, RowParseError, SchemaMismatch, SingleClass
from .flowkit import CSV_HEADER, FEATURE_NAMES, FeatureVector, write_features_csv

N_FEATURES = len(FEATURE_NAMES)
PROTO_INDEX = 0


class ClassLabel(str, enum.Enum):
    SKYPE = "Skype"
    NORMAL = "Normal"

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        t = text.strip().lower()
        for member in cls:
            if member.value.lower() == t:
                return member
        raise ValueError(f"unknown class label {text!r}")

    @property
    def index(self) -> int:
        return CLASS_LABELS.index(self)


# Ordered (Skype, Normal): class index 0 is Skype throughout the package.
CLASS_LABELS = (ClassLabel.SKYPE, ClassLabel.NORMAL)
SKYPE, NORMAL = 0, 1


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix ``X`` (n, 9) and class indices ``y`` (0 = Skype, 1 = Normal)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, N_FEATURES)
        y = np.asarray(self.y, dtype=int).reshape(-1)
        if len(X) != len(y):
            raise ValueError("X and y lengths differ")
        if y.size and not np.isin(y, (SKYPE, NORMAL)).all():
            raise ValueError("labels must be 0 (Skype) or 1 (Normal)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_instances(cls, instances: Iterable[tuple[FeatureVector, ClassLabel]]) -> "LabeledDataset":
        rows, labels = [], []
        for vec, label in instances:
            rows.append(vec.as_array())
            labels.append(ClassLabel(label).index)
        return cls(np.array(rows).reshape(-1, N_FEATURES), np.array(labels, dtype=int))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def class_labels(self) -> tuple[ClassLabel, ClassLabel]:
        return CLASS_LABELS

    @property
    def instances(self) -> list[tuple[FeatureVector, ClassLabel]]:
        return [(FeatureVector.from_array(x), CLASS_LABELS[c]) for x, c in zip(self.X, self.y)]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=2)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset(self.X[idx], self.y[idx])

    def require_trainable(self) -> None:
        if len(self) == 0:
            raise DatasetEmpty("dataset has no instances")
        if (self.class_counts() == 0).any():
            raise SingleClass("both Skype and Normal instances are required")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for x, c in zip(self.X, self.y):
            writer.writerow([repr(float(v)) for v in x] + [CLASS_LABELS[c].value])
        return buf.getvalue()


def load_dataset(text: str) -> LabeledDataset:
    """Parse the feature CSV. Numbers use ``.`` as decimal separator regardless of locale."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("empty input, missing header") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise SchemaMismatch(f"header {header!r} != {list(CSV_HEADER)!r}")
    rows, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise RowParseError(lineno, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            values = [float(c) for c in row[:-1]]
        except ValueError as exc:
            raise RowParseError(lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in values):
            raise RowParseError(lineno, "non-finite value")
        try:
            label = ClassLabel.parse(row[-1])
        except ValueError as exc:
            raise RowParseError(lineno, str(exc)) from None
        rows.append(values)
        labels.append(label.index)
    return LabeledDataset(np.array(rows, dtype=float).reshape(-1, N_FEATURES),
                          np.array(labels, dtype=int))


def stratified_split(ds: LabeledDataset, train_fraction: float, seed: int
                     ) -> tuple[LabeledDataset, LabeledDataset]:
    """Per-class shuffle, then the first ``round(n_c * train_fraction)`` go to training.

    Rounding is half-up. Both halves keep the dataset's original row order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    if len(ds) == 0:
        raise DatasetEmpty("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    train_idx = []
    for c in (SKYPE, NORMAL):
        idx = np.flatnonzero(ds.y == c)
        rng.shuffle(idx)
        k = int(math.floor(len(idx) * train_fraction + 0.5))
        train_idx.extend(idx[:k].tolist())
    mask = np.zeros(len(ds), dtype=bool)
    mask[train_idx] = True
    return ds.subset(np.flatnonzero(mask)), ds.subset(np.flatnonzero(~mask))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


@dataclass(frozen=True)
class Discretizer:
    """Equal-frequency binning of continuous features.

    ``cuts[j]`` holds the strictly ascending interior edges of feature ``j``;
    value ``v`` falls in bin ``i`` iff ``edges[i] <= v < edges[i+1]`` with
    out-of-range values clamped to the first/last bin. Categorical features
    (the protocol indicator) pass through as their integer value.
    """

    cuts: tuple[tuple[float, ...], ...]
    lows: tuple[float, ...]
    highs: tuple[float, ...]
    categorical: tuple[int, ...] = (PROTO_INDEX,)
    n_bins: int = 10

    @classmethod
    def fit(cls, X: np.ndarray, n_bins: int = 10,
            categorical: Sequence[int] = (PROTO_INDEX,)) -> "Discretizer":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if len(X) == 0:
            raise DatasetEmpty("cannot fit a discretizer on no data")
        qs = np.arange(1, n_bins) / n_bins
        cuts, lows, highs = [], [], []
        for j in range(X.shape[1]):
            col = X[:, j]
            lows.append(float(col.min()))
            highs.append(float(col.max()))
            if j in categorical:
                cuts.append(())
                continue
            q = np.quantile(col, qs)
            # an edge at the minimum would leave bin 0 empty
            uniq = [float(c) for c in np.unique(q) if c > col.min()]
            cuts.append(tuple(uniq))
        return cls(tuple(cuts), tuple(lows), tuple(highs), tuple(categorical), n_bins)

    def edges(self, j: int) -> list[float]:
        return [self.lows[j], *self.cuts[j], self.highs[j]]

    def cardinality(self, j: int) -> int:
        if j in self.categorical:
            return 2
        return len(self.cuts[j]) + 1

    @property
    def cardinalities(self) -> list[int]:
        return [self.cardinality(j) for j in range(len(self.cuts))]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        out = np.empty(X2.shape, dtype=int)
        for j in range(X2.shape[1]):
            if j in self.categorical:
                out[:, j] = np.clip(X2[:, j].round().astype(int), 0, 1)
            else:
                out[:, j] = np.searchsorted(np.asarray(self.cuts[j]), X2[:, j], side="right")
        return out[0] if single else out

    def discretize(self, v: FeatureVector) -> np.ndarray:
        return self.transform(v.as_array())

    def to_dict(self) -> dict:
        return {"cuts": [list(c) for c in self.cuts], "lows": list(self.lows),
                "highs": list(self.highs), "categorical": list(self.categorical),
                "n_bins": self.n_bins}

    @classmethod
    def from_dict(cls, d: dict) -> "Discretizer":
        return cls(tuple(tuple(float(x) for x in c) for c in d["cuts"]),
                   tuple(float(x) for x in d["lows"]), tuple(float(x) for x in d["highs"]),
                   tuple(int(x) for x in d["categorical"]), int(d["n_bins"]))


def discretize(d: Discretizer, v: FeatureVector) -> np.ndarray:
    return d.discretize(v)


__all__ = [
    "CLASS_LABELS", "ClassLabel", "Discretizer", "LabeledDataset", "NORMAL", "SKYPE",
    "Standardizer", "discretize", "load_dataset", "stratified_split", "write_features_csv",
]
