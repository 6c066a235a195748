"""Two-stage locality-based discriminant sparse representation (LDSR).

Stage 1 solves the discriminant system on the full training set and
ranks every training sample by its one-sample reconstruction distance
||x - x_i^c a_i^c||. The s closest samples form the locality set; a
second solve on that subset yields per-class coefficients, scored by
the regularized residual ||x - Y_c b_c|| / ||b_c||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClassPartitionedDataset
from .errors import AllScoresInfinite, DimensionMismatch
from .solver import (
    FactoredSystem,
    HyperParams,
    assemble_system,
    blocks_from_gram,
    solve_spd,
    _check_query,
)


@dataclass(frozen=True)
class LocalitySet:
    """Locality-restricted training subset for the second-stage solve."""

    selected_indices: np.ndarray
    subset: ClassPartitionedDataset
    surviving_classes: np.ndarray  # class indices (into train) with >= 1 sample


@dataclass(frozen=True)
class ClassDecision:
    """Per-class scores and the induced label ranking (smaller is better)."""

    labels: np.ndarray
    scores: np.ndarray
    predicted: object
    ranking: np.ndarray


def decision_from_scores(labels: np.ndarray, scores: np.ndarray) -> ClassDecision:
    """Rank classes by ascending score; ties keep label order."""
    if not np.any(np.isfinite(scores)):
        raise AllScoresInfinite("every class score is infinite")
    order = np.argsort(scores, kind="stable")
    ranking = labels[order]
    return ClassDecision(
        labels=labels, scores=scores, predicted=ranking[0], ranking=ranking
    )


def select_smallest(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` smallest values, ties to the lower index.

    Returned in ascending index order.
    """
    order = np.argsort(values, kind="stable")
    return np.sort(order[:count])


def locality_size(fraction: float, n_samples: int) -> int:
    """s = max(1, round(fraction * L)), rounding halves up."""
    return max(1, int(np.floor(fraction * n_samples + 0.5)))


def subset_partition(offsets: np.ndarray, selected: np.ndarray):
    """Partition sorted selected columns by the classes they came from.

    Returns (sub_offsets, surviving) where surviving holds the original
    class indices that kept at least one sample.
    """
    per_class = np.histogram(selected, bins=offsets)[0]
    surviving = np.flatnonzero(per_class > 0)
    sub_offsets = np.concatenate(([0], np.cumsum(per_class[surviving])))
    return sub_offsets.astype(np.int64), surviving


def class_scores(
    n_classes: int,
    surviving: np.ndarray,
    sub_offsets: np.ndarray,
    beta: np.ndarray,
    rhs: np.ndarray,
    gram: np.ndarray,
    query_sq: float,
) -> np.ndarray:
    """Regularized residual score per class; inf for absent/zero blocks.

    Residuals come from the Gram expansion
    ||x - Y_c b_c||^2 = x.x - 2 (Y_c^T x).b_c + b_c (Y_c^T Y_c) b_c.
    """
    scores = np.full(n_classes, np.inf)
    for j, c in enumerate(surviving):
        lo, hi = int(sub_offsets[j]), int(sub_offsets[j + 1])
        bc = beta[lo:hi]
        bn = np.linalg.norm(bc)
        if bn == 0.0:
            continue
        r2 = query_sq - 2.0 * (rhs[lo:hi] @ bc) + bc @ gram[lo:hi, lo:hi] @ bc
        scores[int(c)] = np.sqrt(max(r2, 0.0)) / bn
    return scores


class LdsrClassifier:
    """Prepared LDSR model: one factorization per (train, hp), reused
    across queries. Immutable after construction."""

    method = "ldsr"

    def __init__(self, train: ClassPartitionedDataset, hp: HyperParams):
        self.train = train
        self.hp = hp
        gram = train.features.T @ train.features
        self.gram = (gram + gram.T) / 2
        self.system = FactoredSystem(train, hp, gram=self.gram)
        self.col_sq = np.diag(self.gram).copy()
        self.size = locality_size(hp.locality_fraction, train.n_samples)

    def _stage1(self, queries: np.ndarray):
        """Batched stage-1 solve and per-sample distances."""
        rhs = self.train.features.T @ queries
        alphas = self.system.coefficients(rhs)
        query_sq = np.einsum("ij,ij->j", queries, queries)
        d2 = query_sq[None, :] - 2.0 * alphas * rhs + alphas**2 * self.col_sq[:, None]
        return rhs, alphas, np.maximum(d2, 0.0), query_sq

    def _decide_one(self, rhs, d2, query_sq) -> ClassDecision:
        sel = select_smallest(d2, self.size)
        sub_offsets, surviving = subset_partition(self.train.offsets, sel)
        sub_gram = self.gram[np.ix_(sel, sel)]
        blocks = blocks_from_gram(sub_gram, sub_offsets)
        system = assemble_system(sub_gram, blocks, self.hp, len(surviving))
        beta = solve_spd(system, rhs[sel])
        scores = class_scores(
            self.train.n_classes,
            surviving,
            sub_offsets,
            beta,
            rhs[sel],
            sub_gram,
            query_sq,
        )
        return decision_from_scores(self.train.class_labels, scores)

    def decide_batch(self, queries: np.ndarray) -> list[ClassDecision]:
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2:
            raise ValueError("queries must be a (q, n) matrix")
        if queries.shape[0] != self.train.n_features:
            raise DimensionMismatch(
                f"queries have {queries.shape[0]} features, "
                f"training set has {self.train.n_features}"
            )
        rhs, _, d2, query_sq = self._stage1(queries)
        return [
            self._decide_one(rhs[:, j], d2[:, j], float(query_sq[j]))
            for j in range(queries.shape[1])
        ]

    def decide(self, x: np.ndarray) -> ClassDecision:
        x = _check_query(self.train, x)
        return self.decide_batch(x[:, None])[0]

    def locality(self, x: np.ndarray) -> LocalitySet:
        x = _check_query(self.train, x)
        _, _, d2, _ = self._stage1(x[:, None])
        sel = select_smallest(d2[:, 0], self.size)
        _, surviving = subset_partition(self.train.offsets, sel)
        return LocalitySet(
            selected_indices=sel,
            subset=self.train.subset(sel),
            surviving_classes=surviving,
        )


def select_locality(
    train: ClassPartitionedDataset, x: np.ndarray, hp: HyperParams
) -> LocalitySet:
    """Stage-1 solve and locality-set selection for one query."""
    return LdsrClassifier(train, hp).locality(x)


def classify(
    train: ClassPartitionedDataset, x: np.ndarray, hp: HyperParams
) -> ClassDecision:
    """Full two-stage LDSR decision for one query."""
    return LdsrClassifier(train, hp).decide(x)


def classify_batch(
    train: ClassPartitionedDataset, queries: np.ndarray, hp: HyperParams
) -> list[ClassDecision]:
    """LDSR decisions for each column of ``queries``."""
    return LdsrClassifier(train, hp).decide_batch(queries)
