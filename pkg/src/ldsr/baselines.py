"""Closed-form comparison classifiers: CRC and NSC.

CRC solves one ridge system over the whole training set and scores each
class by residual / coefficient norm. NSC fits an unregularized least
squares per class and scores by the plain residual norm.
"""

from __future__ import annotations

import numpy as np

from .classifier import ClassDecision, decision_from_scores
from .dataset import ClassPartitionedDataset
from .errors import DimensionMismatch
from .solver import SpdSolver


def _check_batch(train: ClassPartitionedDataset, queries: np.ndarray) -> np.ndarray:
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2:
        raise ValueError("queries must be a (q, n) matrix")
    if queries.shape[0] != train.n_features:
        raise DimensionMismatch(
            f"queries have {queries.shape[0]} features, "
            f"training set has {train.n_features}"
        )
    return queries


class CrcClassifier:
    """Collaborative representation: alpha = (X^T X + lam I)^-1 X^T x,
    scored by ||x - X_c alpha_c|| / ||alpha_c||."""

    method = "crc"

    def __init__(self, train: ClassPartitionedDataset, lam: float):
        if lam <= 0:
            raise ValueError("lam must be positive for CRC")
        self.train = train
        self.lam = lam
        gram = train.features.T @ train.features
        system = (gram + gram.T) / 2
        system[np.diag_indices_from(system)] += lam
        self._solver = SpdSolver(system)

    def decide_batch(self, queries: np.ndarray) -> list[ClassDecision]:
        queries = _check_batch(self.train, queries)
        alphas = self._solver.solve(self.train.features.T @ queries)
        m, n = self.train.n_classes, queries.shape[1]
        scores = np.empty((m, n))
        for c in range(m):
            block = self.train.class_block(c)
            part = alphas[self.train.class_slice(c), :]
            resid = np.linalg.norm(queries - block @ part, axis=0)
            coeff = np.linalg.norm(part, axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                scores[c] = np.where(coeff > 0, resid / coeff, np.inf)
        return [
            decision_from_scores(self.train.class_labels, scores[:, j])
            for j in range(n)
        ]

    def decide(self, x: np.ndarray) -> ClassDecision:
        return self.decide_batch(np.asarray(x, dtype=np.float64).reshape(-1, 1))[0]


class NscClassifier:
    """Nearest subspace: per-class least-squares residual, minimum-norm
    solution when a class block is rank deficient."""

    method = "nsc"

    def __init__(self, train: ClassPartitionedDataset):
        self.train = train
        self._pinvs = [
            np.linalg.pinv(train.class_block(c)) for c in range(train.n_classes)
        ]

    def decide_batch(self, queries: np.ndarray) -> list[ClassDecision]:
        queries = _check_batch(self.train, queries)
        m, n = self.train.n_classes, queries.shape[1]
        scores = np.empty((m, n))
        for c in range(m):
            block = self.train.class_block(c)
            w = self._pinvs[c] @ queries
            scores[c] = np.linalg.norm(queries - block @ w, axis=0)
        return [
            decision_from_scores(self.train.class_labels, scores[:, j])
            for j in range(n)
        ]

    def decide(self, x: np.ndarray) -> ClassDecision:
        return self.decide_batch(np.asarray(x, dtype=np.float64).reshape(-1, 1))[0]


def crc_classify(
    train: ClassPartitionedDataset, x: np.ndarray, lam: float
) -> ClassDecision:
    return CrcClassifier(train, lam).decide(x)


def nsc_classify(train: ClassPartitionedDataset, x: np.ndarray) -> ClassDecision:
    return NscClassifier(train).decide(x)
