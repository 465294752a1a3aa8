"""Binary logistic regression fitted by full-batch gradient ascent.

``p(Skype | x) = g(beta . [1, z])`` with ``z`` the standardized features and
``g`` the sigmoid. The objective is the log-likelihood with a tiny L2
penalty on the non-intercept weights; the step size is found by halving
until the objective improves.
"""
from __future__ import annotations

import logging

import numpy as np

from ..errors import DatasetEmpty, NonFinite, SingleClass
from ..learnkit import LabeledDataset, Standardizer
from .common import Classifier

logger = logging.getLogger(__name__)

L2_PENALTY = 1e-8


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    # exp of a non-positive argument only; both branches are exact
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def design_matrix(Z: np.ndarray) -> np.ndarray:
    Z = np.atleast_2d(Z)
    return np.hstack([np.ones((Z.shape[0], 1)), Z])


def log_likelihood(beta: np.ndarray, A: np.ndarray, t: np.ndarray, l2: float = L2_PENALTY) -> float:
    """Penalized log-likelihood; ``A`` is the design matrix, ``t`` is 1 for Skype."""
    eta = A @ beta
    # log g(eta) = -log(1 + e^-eta); log(1 - g(eta)) = -log(1 + e^eta)
    ll = -(t * np.logaddexp(0.0, -eta) + (1 - t) * np.logaddexp(0.0, eta)).sum()
    return float(ll - 0.5 * l2 * np.dot(beta[1:], beta[1:]))


def log_likelihood_gradient(beta: np.ndarray, A: np.ndarray, t: np.ndarray,
                            l2: float = L2_PENALTY) -> np.ndarray:
    grad = A.T @ (t - sigmoid(A @ beta))
    grad[1:] -= l2 * beta[1:]
    return grad


class LogisticModel(Classifier):
    kind = "logistic"

    def __init__(self, beta: np.ndarray | None = None, standardizer: Standardizer | None = None,
                 iterations: int = 0, converged: bool = False):
        self.beta = None if beta is None else np.asarray(beta, dtype=float)
        self.standardizer = standardizer
        self.iterations = iterations
        self.converged = converged
        self.trained = self.beta is not None and standardizer is not None

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        A = design_matrix(self.standardizer.transform(np.atleast_2d(X)))
        return A @ self.beta

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p = sigmoid(self.decision_function(X))
        return np.column_stack([p, 1.0 - p])

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist(), "standardizer": self.standardizer.to_dict(),
                "iterations": self.iterations, "converged": self.converged}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.asarray(d["beta"], dtype=float), Standardizer.from_dict(d["standardizer"]),
                   int(d.get("iterations", 0)), bool(d.get("converged", False)))


def train_logistic(ds: LabeledDataset, max_iters: int = 2000, tol: float = 1e-6,
                   l2: float = L2_PENALTY) -> LogisticModel:
    if len(ds) == 0:
        raise DatasetEmpty("cannot train on an empty dataset")
    if (ds.class_counts() == 0).any():
        raise SingleClass("logistic regression needs both classes")
    std = Standardizer.fit(ds.X)
    A = design_matrix(std.transform(ds.X))
    t = (ds.y == 0).astype(float)
    n = len(t)
    beta = np.zeros(A.shape[1])
    ll = log_likelihood(beta, A, t, l2)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        grad = log_likelihood_gradient(beta, A, t, l2)
        if np.abs(grad).max() / n < tol:
            converged = True
            break
        # per-instance scaling keeps the initial step size data-size independent
        direction = grad / n
        step = min(step * 2.0, 1e6)
        for _ in range(60):
            cand = beta + step * direction
            cand_ll = log_likelihood(cand, A, t, l2)
            if cand_ll > ll:
                break
            step *= 0.5
        else:
            converged = True
            break
        beta, ll = cand, cand_ll
        if not (np.isfinite(beta).all() and np.isfinite(ll)):
            raise NonFinite("logistic coefficients diverged")
    logger.debug("logistic: %d iterations, converged=%s, ll=%.6g", it, converged, ll)
    return LogisticModel(beta, std, it, converged)
