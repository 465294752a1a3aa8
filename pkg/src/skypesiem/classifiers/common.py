from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import UntrainedModel
from ..flowkit import FeatureVector
from ..learnkit import CLASS_LABELS, ClassLabel

MODEL_FORMAT = "skypesiem-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Posterior:
    p_skype: float
    p_normal: float

    def __post_init__(self):
        if not (0.0 <= self.p_skype <= 1.0 and 0.0 <= self.p_normal <= 1.0):
            raise ValueError(f"posterior out of range: {self}")
        if abs(self.p_skype + self.p_normal - 1.0) > 1e-9:
            raise ValueError(f"posterior does not sum to 1: {self}")

    @classmethod
    def from_skype(cls, p: float) -> "Posterior":
        p = min(1.0, max(0.0, float(p)))
        return cls(p, 1.0 - p)

    @property
    def label(self) -> ClassLabel:
        # ties go to Normal
        return ClassLabel.SKYPE if self.p_skype > self.p_normal else ClassLabel.NORMAL

    def as_tuple(self) -> tuple[float, float]:
        return (self.p_skype, self.p_normal)


class Classifier:
    """Shared surface of the three trained models.

    Subclasses implement :meth:`predict_proba` returning an ``(n, 2)`` array
    of (p_skype, p_normal) rows.
    """

    kind = "abstract"
    trained = False

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def posterior(self, v: FeatureVector | np.ndarray) -> Posterior:
        x = v.as_array() if isinstance(v, FeatureVector) else np.asarray(v, dtype=float)
        if not np.isfinite(x).all():
            raise ValueError("feature vector must be finite")
        p = self.predict_proba(x[None, :])[0]
        return Posterior.from_skype(p[0])

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        """Class indices (0 = Skype) with ties toward Normal."""
        P = self.predict_proba(X)
        return np.where(P[:, 0] > P[:, 1], 0, 1)

    def to_dict(self) -> dict:
        raise NotImplementedError


def predict(model, v: FeatureVector) -> tuple[ClassLabel, Posterior]:
    if not isinstance(model, Classifier) or not model.trained:
        raise UntrainedModel(f"{type(model).__name__} is not a trained model")
    post = model.posterior(v)
    return post.label, post


def normalize_log_rows(logp: np.ndarray) -> np.ndarray:
    m = logp.max(axis=1, keepdims=True)
    e = np.exp(logp - m)
    return e / e.sum(axis=1, keepdims=True)


def label_of(index: int) -> ClassLabel:
    return CLASS_LABELS[index]


def check_finite(values, what: str) -> None:
    if not all(math.isfinite(float(v)) for v in np.ravel(values)):
        from ..errors import NonFinite
        raise NonFinite(f"{what} contains non-finite values")
