"""Majority voting over three classifiers.

Each posterior is hardened into a one-hot vote; the class with most votes
wins. With two classes and three voters there is never a tie. The mean
Skype posterior is carried alongside as a continuous ranking score for ROC
analysis, since hard votes alone cannot trace a curve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .classifiers import ENSEMBLE_ORDER, Classifier, Posterior
from .errors import WrongArity
from .flowkit import FeatureVector
from .learnkit import ClassLabel

N_VOTERS = 3


def harden(p: Posterior) -> tuple[int, int]:
    """(delta_skype, delta_normal); a posterior tie votes Normal."""
    return (1, 0) if p.p_skype > p.p_normal else (0, 1)


@dataclass(frozen=True)
class VoteVector:
    posteriors: tuple[Posterior, ...]

    def __post_init__(self):
        object.__setattr__(self, "posteriors", tuple(self.posteriors))

    @property
    def deltas(self) -> tuple[tuple[int, int], ...]:
        return tuple(harden(p) for p in self.posteriors)


@dataclass(frozen=True)
class EnsembleDecision:
    label: ClassLabel
    vote_count: int  # votes for Skype
    score: float     # mean p_skype

    @property
    def posterior(self) -> Posterior:
        return Posterior.from_skype(self.score)


def majority_vote(v: VoteVector | Sequence[Posterior]) -> EnsembleDecision:
    posteriors = v.posteriors if isinstance(v, VoteVector) else tuple(v)
    if len(posteriors) != N_VOTERS:
        raise WrongArity(f"majority vote needs {N_VOTERS} classifiers, got {len(posteriors)}")
    deltas = [harden(p) for p in posteriors]
    totals = [sum(d[k] for d in deltas) for k in (0, 1)]
    label = ClassLabel.SKYPE if totals[0] > totals[1] else ClassLabel.NORMAL
    score = sum(p.p_skype for p in posteriors) / N_VOTERS
    return EnsembleDecision(label, totals[0], score)


class Ensemble:
    """The three trained models voting together."""

    def __init__(self, models: Mapping[str, Classifier] | Sequence[Classifier]):
        if isinstance(models, Mapping):
            self.names = [k for k in ENSEMBLE_ORDER if k in models] + \
                         [k for k in models if k not in ENSEMBLE_ORDER]
            self.models = [models[k] for k in self.names]
        else:
            self.models = list(models)
            self.names = [m.kind for m in self.models]
        if len(self.models) != N_VOTERS:
            raise WrongArity(f"ensemble needs {N_VOTERS} models, got {len(self.models)}")

    def decide(self, v: FeatureVector) -> EnsembleDecision:
        return majority_vote(VoteVector([m.posterior(v) for m in self.models]))

    def member_proba(self, X: np.ndarray) -> list[np.ndarray]:
        return [m.predict_proba(X) for m in self.models]

    def decide_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised vote: returns (labels, vote_counts, scores); label 0 = Skype."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) == 0:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        probas = self.member_proba(X)
        votes = sum((P[:, 0] > P[:, 1]).astype(int) for P in probas)
        scores = sum(P[:, 0] for P in probas) / N_VOTERS
        labels = np.where(votes * 2 > N_VOTERS, 0, 1)
        return labels, votes, scores
