"""Closed-form solver for the discriminant-regularized representation.

The coefficient vector minimizes

    ||x - X a||^2 + lam ||a||^2
      + eta * sum_c sum_i ||x_i^c a_i^c - X_c a_c||^2        (within-class)
      + gamma * sum_{i != j} ||X_i a_i + X_j a_j||^2         (between-class)

whose unique stationary point solves

    ((1 + 2 gamma) X^T X + lam I + eta W + 2 gamma (M - 2) B) a = X^T x

where W and B are block-diagonal with per-class blocks

    W_c = (N_c - 2) G_c + diag(G_c),   B_c = G_c,   G_c = X_c^T X_c.

``objective`` evaluates the penalty by direct summation and ``gradient``
by the block algebra, so the two routes cross-check each other; ``solve``
verifies stationarity of every solution it returns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import ClassPartitionedDataset
from .errors import DimensionMismatch, SingularSystem

STATIONARITY_TOL = 1e-8


@dataclass(frozen=True)
class HyperParams:
    """Regularization weights and classifier knobs.

    lam, eta, gamma : nonnegative weights of the ridge, within-class,
        and between-class penalties.
    locality_fraction : fraction of training samples kept for the
        second-stage solve, in (0, 1].
    sigma : RBF bandwidth (divides the squared distance); None selects
        the median heuristic at Gram-build time.
    """

    lam: float = 0.01
    eta: float = 1e-4
    gamma: float = 1e-4
    locality_fraction: float = 0.3
    sigma: float | None = None

    def __post_init__(self):
        for name in ("lam", "eta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.locality_fraction <= 1.0:
            raise ValueError("locality_fraction must be in (0, 1]")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class RegularizerBlocks:
    """Per-class blocks of the two block-diagonal regularizers.

    within[c] = (N_c - 2) G_c + diag(G_c), the leave-one-in accumulation;
    between[c] = G_c = X_c^T X_c.
    """

    within: tuple
    between: tuple
    offsets: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.within)

    def _dense(self, blocks) -> np.ndarray:
        n = int(self.offsets[-1])
        out = np.zeros((n, n))
        for c, blk in enumerate(blocks):
            lo, hi = int(self.offsets[c]), int(self.offsets[c + 1])
            out[lo:hi, lo:hi] = blk
        return out

    def within_dense(self) -> np.ndarray:
        return self._dense(self.within)

    def between_dense(self) -> np.ndarray:
        return self._dense(self.between)

    def apply(self, alpha: np.ndarray, eta: float, coef_between: float) -> np.ndarray:
        """(eta * W + coef_between * B) @ alpha without materializing."""
        out = np.zeros_like(alpha)
        for c in range(self.n_classes):
            lo, hi = int(self.offsets[c]), int(self.offsets[c + 1])
            seg = alpha[lo:hi]
            out[lo:hi] = eta * (self.within[c] @ seg) + coef_between * (
                self.between[c] @ seg
            )
        return out


def _within_block(g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    return (n - 2) * g + np.diag(np.diag(g))


def blocks_from_gram(gram: np.ndarray, offsets: np.ndarray) -> RegularizerBlocks:
    """Build the regularizer blocks from a precomputed X^T X."""
    within, between = [], []
    for c in range(len(offsets) - 1):
        lo, hi = int(offsets[c]), int(offsets[c + 1])
        g = gram[lo:hi, lo:hi]
        between.append(g)
        within.append(_within_block(g))
    return RegularizerBlocks(tuple(within), tuple(between), np.asarray(offsets))


def build_blocks(train: ClassPartitionedDataset) -> RegularizerBlocks:
    """Regularizer blocks of a training set (G_c computed per class)."""
    within, between = [], []
    for c in range(train.n_classes):
        xc = train.class_block(c)
        g = xc.T @ xc
        g = (g + g.T) / 2
        between.append(g)
        within.append(_within_block(g))
    return RegularizerBlocks(tuple(within), tuple(between), train.offsets)


@dataclass(frozen=True)
class CoefficientSolution:
    """Coefficient vector partitioned by class, plus solve diagnostics."""

    coeffs: np.ndarray
    objective: float
    grad_inf_norm: float
    offsets: np.ndarray

    def class_coeffs(self, c: int) -> np.ndarray:
        return self.coeffs[int(self.offsets[c]) : int(self.offsets[c + 1])]


def _check_query(train: ClassPartitionedDataset, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != train.n_features:
        raise DimensionMismatch(
            f"query has {x.shape[0]} features, training set has {train.n_features}"
        )
    return x


def _check_coeffs(train: ClassPartitionedDataset, alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.shape[0] != train.n_samples:
        raise DimensionMismatch(
            f"coefficient vector has length {alpha.shape[0]}, "
            f"training set has {train.n_samples} samples"
        )
    return alpha


def objective(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    alpha: np.ndarray,
    hp: HyperParams,
) -> float:
    """Objective value, accumulated term by term (no block shortcuts)."""
    x = _check_query(train, x)
    alpha = _check_coeffs(train, alpha)
    total = float(np.sum((x - train.features @ alpha) ** 2))
    total += hp.lam * float(alpha @ alpha)
    reps = []
    for c in range(train.n_classes):
        xc = train.class_block(c)
        ac = alpha[train.class_slice(c)]
        rep = xc @ ac
        reps.append(rep)
        if hp.eta:
            scaled = xc * ac  # columns x_i^c * a_i^c
            total += hp.eta * float(np.sum((scaled - rep[:, None]) ** 2))
    if hp.gamma:
        for i in range(train.n_classes):
            for j in range(train.n_classes):
                if i != j:
                    total += hp.gamma * float(np.sum((reps[i] + reps[j]) ** 2))
    return total


def gradient(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    alpha: np.ndarray,
    hp: HyperParams,
    blocks: RegularizerBlocks | None = None,
) -> np.ndarray:
    """Gradient of the objective at ``alpha`` via the block algebra."""
    x = _check_query(train, x)
    alpha = _check_coeffs(train, alpha)
    if blocks is None:
        blocks = build_blocks(train)
    X = train.features
    m = train.n_classes
    g = -2.0 * (X.T @ (x - X @ alpha)) + 2.0 * hp.lam * alpha
    g += 4.0 * hp.gamma * (X.T @ (X @ alpha))
    g += blocks.apply(alpha, 2.0 * hp.eta, 4.0 * hp.gamma * (m - 2))
    return g


def assemble_system(
    gram: np.ndarray,
    blocks: RegularizerBlocks,
    hp: HyperParams,
    n_classes: int,
) -> np.ndarray:
    """Dense system matrix (1+2g) X^T X + lam I + eta W + 2g(M-2) B."""
    s = (1.0 + 2.0 * hp.gamma) * gram
    s = (s + s.T) / 2
    s[np.diag_indices_from(s)] += hp.lam
    coef_b = 2.0 * hp.gamma * (n_classes - 2)
    for c in range(blocks.n_classes):
        lo, hi = int(blocks.offsets[c]), int(blocks.offsets[c + 1])
        s[lo:hi, lo:hi] += hp.eta * blocks.within[c] + coef_b * blocks.between[c]
    return s


class SpdSolver:
    """Cholesky factorization with a pivoted least-squares fallback for
    singular systems (possible only at lam = 0)."""

    def __init__(self, system: np.ndarray):
        self.system = system
        try:
            self._factor = scipy.linalg.cho_factor(system, lower=True)
        except scipy.linalg.LinAlgError:
            self._factor = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._factor is not None:
            return scipy.linalg.cho_solve(self._factor, rhs)
        return scipy.linalg.lstsq(self.system, rhs, lapack_driver="gelsy")[0]


def solve_spd(system: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """One-shot Cholesky solve with least-squares fallback."""
    return SpdSolver(system).solve(rhs)


class FactoredSystem:
    """Cached factorization of the system matrix for one (train, hp) pair.

    Immutable once built; safe to share across concurrent solves.
    """

    def __init__(
        self,
        train: ClassPartitionedDataset,
        hp: HyperParams,
        blocks: RegularizerBlocks | None = None,
        gram: np.ndarray | None = None,
    ):
        self.train = train
        self.hp = hp
        if gram is None:
            gram = train.features.T @ train.features
        if blocks is None:
            blocks = blocks_from_gram(gram, train.offsets)
        self.blocks = blocks
        self._solver = SpdSolver(assemble_system(gram, blocks, hp, train.n_classes))

    @property
    def system(self) -> np.ndarray:
        return self._solver.system

    def coefficients(self, rhs: np.ndarray) -> np.ndarray:
        return self._solver.solve(rhs)


def solve(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    hp: HyperParams,
    blocks: RegularizerBlocks | None = None,
    system: FactoredSystem | None = None,
) -> CoefficientSolution:
    """Solve the stationarity system and verify the result.

    Raises SingularSystem when no stationary point is found at working
    precision (possible only when lam = 0 on rank-deficient data).
    """
    x = _check_query(train, x)
    if system is None:
        system = FactoredSystem(train, hp, blocks=blocks)
    alpha = system.coefficients(train.features.T @ x)
    obj = objective(train, x, alpha, hp)
    grad_inf = float(np.max(np.abs(gradient(train, x, alpha, hp, system.blocks))))
    if grad_inf > STATIONARITY_TOL * (1.0 + abs(obj)):
        raise SingularSystem(
            f"no stationary solution: |grad|_inf = {grad_inf:.3e} "
            f"with objective {obj:.3e}"
        )
    return CoefficientSolution(
        coeffs=alpha,
        objective=obj,
        grad_inf_norm=grad_inf,
        offsets=train.offsets,
    )


def residual_distances(
    train: ClassPartitionedDataset,
    x: np.ndarray,
    sol: CoefficientSolution,
) -> np.ndarray:
    """Per-sample distances ||x - x_i^c a_i^c|| for every training column."""
    x = _check_query(train, x)
    alpha = _check_coeffs(train, sol.coeffs)
    cross = train.features.T @ x
    col_sq = np.einsum("ij,ij->j", train.features, train.features)
    d2 = float(x @ x) - 2.0 * alpha * cross + alpha**2 * col_sq
    return np.sqrt(np.maximum(d2, 0.0))
