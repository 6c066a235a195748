"""RBF kernel machinery and the kernelized two-stage classifier (KLDSR).

The Gram matrix K stands in for the sample matrix: the kernelized
system is the linear one with X replaced by K (columns of K act as
samples) and the query replaced by the kernel vector k(., x). The RBF
kernel divides the squared distance by sigma directly:

    k(x, y) = exp(-||x - y||^2 / sigma)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import (
    ClassDecision,
    class_scores,
    decision_from_scores,
    locality_size,
    select_smallest,
    subset_partition,
)
from .dataset import ClassPartitionedDataset
from .errors import DimensionMismatch
from .solver import (
    CoefficientSolution,
    HyperParams,
    SpdSolver,
    assemble_system,
    blocks_from_gram,
    solve,
    solve_spd,
    _check_query,
)

KERNEL_KINDS = ("rbf", "linear")


def rbf(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """exp(-||x - y||^2 / sigma); sigma divides the squared distance."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DimensionMismatch(f"vector lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = x - y
    return float(np.exp(-(d @ d) / sigma))


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.einsum("ij,ij->j", a, a)
    bb = np.einsum("ij,ij->j", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a.T @ b)
    return np.maximum(d2, 0.0)


def kernel_matrix(
    a: np.ndarray, b: np.ndarray, kind: str = "rbf", sigma: float | None = None
) -> np.ndarray:
    """Pairwise kernel values k(a_i, b_j) as an (na, nb) matrix."""
    if kind == "rbf":
        return np.exp(-_pairwise_sq_dists(a, b) / sigma)
    if kind == "linear":
        return a.T @ b
    raise ValueError(f"unknown kernel kind {kind!r}")


def median_bandwidth(
    train: ClassPartitionedDataset, max_samples: int = 2000, seed: int = 0
) -> float:
    """Median of pairwise squared distances (seeded subsample when large)."""
    x = train.features
    if x.shape[1] > max_samples:
        cols = np.random.default_rng(seed).choice(
            x.shape[1], size=max_samples, replace=False
        )
        x = x[:, np.sort(cols)]
    d2 = _pairwise_sq_dists(x, x)
    vals = d2[np.triu_indices(d2.shape[0], k=1)]
    med = float(np.median(vals)) if vals.size else 0.0
    if med <= 0.0:
        pos = vals[vals > 0]
        med = float(np.median(pos)) if pos.size else 1.0
    return med


@dataclass(frozen=True)
class KernelGram:
    """Full kernel matrix over the training set, with its class layout."""

    gram: np.ndarray
    class_labels: np.ndarray
    offsets: np.ndarray
    kind: str
    sigma: float | None

    @property
    def n_samples(self) -> int:
        return self.gram.shape[0]


@dataclass(frozen=True)
class QueryKernelVector:
    """k(x_i, x) for every training sample plus the query self-similarity."""

    vec: np.ndarray
    self_similarity: float


def resolve_sigma(
    train: ClassPartitionedDataset, hp_or_sigma, kind: str = "rbf"
) -> float | None:
    """Bandwidth from an explicit value or the median heuristic."""
    if kind == "linear":
        return None
    sigma = hp_or_sigma.sigma if isinstance(hp_or_sigma, HyperParams) else hp_or_sigma
    if sigma is None:
        sigma = median_bandwidth(train)
    return float(sigma)


def build_gram(
    train: ClassPartitionedDataset, sigma: float | None = None, kind: str = "rbf"
) -> KernelGram:
    """Symmetric Gram matrix; sigma=None applies the median heuristic."""
    sigma = resolve_sigma(train, sigma, kind)
    k = kernel_matrix(train.features, train.features, kind, sigma)
    k = (k + k.T) / 2
    if kind == "rbf":
        np.fill_diagonal(k, 1.0)
    return KernelGram(
        gram=k,
        class_labels=train.class_labels,
        offsets=train.offsets,
        kind=kind,
        sigma=sigma,
    )


def query_vector(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    sigma: float | None = None,
    kind: str = "rbf",
) -> QueryKernelVector:
    """Kernel evaluations of the query against every training sample."""
    x = _check_query(train, x)
    sigma = resolve_sigma(train, sigma, kind)
    vec = kernel_matrix(train.features, x[:, None], kind, sigma)[:, 0]
    self_sim = 1.0 if kind == "rbf" else float(x @ x)
    return QueryKernelVector(vec=vec, self_similarity=self_sim)


def _gram_as_dataset(gram: KernelGram) -> ClassPartitionedDataset:
    return ClassPartitionedDataset(
        features=gram.gram,
        class_labels=gram.class_labels,
        offsets=gram.offsets,
    )


def ksolve(
    gram: KernelGram, kvec: QueryKernelVector, hp: HyperParams
) -> CoefficientSolution:
    """Solve the kernelized system: same algebra with K as the dictionary."""
    return solve(_gram_as_dataset(gram), kvec.vec, hp)


def kernel_distance(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    index: int,
    coeff: float,
    sigma: float | None = None,
    kind: str = "rbf",
) -> float:
    """Feature-space distance ||phi(x) - phi(x_i) a_i|| via kernel values."""
    x = _check_query(train, x)
    sigma = resolve_sigma(train, sigma, kind)
    xi = train.features[:, index]
    if kind == "rbf":
        kxx, kxi, kii = 1.0, rbf(x, xi, sigma), 1.0
    else:
        kxx, kxi, kii = float(x @ x), float(x @ xi), float(xi @ xi)
    d2 = kxx - 2.0 * kxi * coeff + coeff * coeff * kii
    return float(np.sqrt(max(d2, 0.0)))


class KldsrClassifier:
    """Prepared KLDSR model; Gram and stage-1 factorization are shared
    across queries, stage-2 systems are per-query over the locality set."""

    method = "kldsr"

    def __init__(
        self,
        train: ClassPartitionedDataset,
        hp: HyperParams,
        kind: str = "rbf",
    ):
        if kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        self.train = train
        self.hp = hp
        self.kind = kind
        self.sigma = resolve_sigma(train, hp, kind)
        self.kgram = build_gram(train, self.sigma, kind)
        k = self.kgram.gram
        k2 = k @ k
        self.dict_gram = (k2 + k2.T) / 2
        self.blocks = blocks_from_gram(self.dict_gram, train.offsets)
        self._solver = SpdSolver(
            assemble_system(self.dict_gram, self.blocks, hp, train.n_classes)
        )
        self.kdiag = np.diag(k).copy()
        self.size = locality_size(hp.locality_fraction, train.n_samples)

    def _query_matrix(self, queries: np.ndarray) -> np.ndarray:
        return kernel_matrix(self.train.features, queries, self.kind, self.sigma)

    def decide_batch(self, queries: np.ndarray) -> list[ClassDecision]:
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2:
            raise ValueError("queries must be a (q, n) matrix")
        if queries.shape[0] != self.train.n_features:
            raise DimensionMismatch(
                f"queries have {queries.shape[0]} features, "
                f"training set has {self.train.n_features}"
            )
        kv = self._query_matrix(queries)
        if self.kind == "rbf":
            self_sims = np.ones(queries.shape[1])
        else:
            self_sims = np.einsum("ij,ij->j", queries, queries)
        rhs = self.kgram.gram @ kv
        alphas = self._solver.solve(rhs)
        d2 = (
            self_sims[None, :]
            - 2.0 * kv * alphas
            + alphas**2 * self.kdiag[:, None]
        )
        d2 = np.maximum(d2, 0.0)
        return [
            self._decide_one(kv[:, j], d2[:, j]) for j in range(queries.shape[1])
        ]

    def _decide_one(self, kvec: np.ndarray, d2: np.ndarray) -> ClassDecision:
        sel = select_smallest(d2, self.size)
        sub_offsets, surviving = subset_partition(self.train.offsets, sel)
        u = self.kgram.gram[np.ix_(sel, sel)]
        uvec = kvec[sel]
        u2 = u @ u
        u2 = (u2 + u2.T) / 2
        blocks = blocks_from_gram(u2, sub_offsets)
        system = assemble_system(u2, blocks, self.hp, len(surviving))
        rhs = u @ uvec
        beta = solve_spd(system, rhs)
        scores = class_scores(
            self.train.n_classes,
            surviving,
            sub_offsets,
            beta,
            rhs,
            u2,
            float(uvec @ uvec),
        )
        return decision_from_scores(self.train.class_labels, scores)

    def decide(self, x: np.ndarray) -> ClassDecision:
        x = _check_query(self.train, x)
        return self.decide_batch(x[:, None])[0]


def kclassify(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    hp: HyperParams,
    kind: str = "rbf",
) -> ClassDecision:
    """Two-stage kernelized decision for one query."""
    return KldsrClassifier(train, hp, kind).decide(x)
