"""Per-class dictionary compaction by alternating least squares.

Each class block X_k is replaced by k learned atoms D_k minimizing
||X_k - D_k A_k||_F^2 + tau ||A_k||_F^2. Both ALS steps are exact
ridge/least-squares solves, so the objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClassPartitionedDataset, from_labeled_columns
from .errors import InvalidAtomCount
from .solver import solve_spd

_DSTEP_EPS = 1e-12


@dataclass(frozen=True)
class ClassDictionary:
    """Learned atoms and codes for one class block."""

    atoms: np.ndarray  # (q, k), unit-norm columns
    codes: np.ndarray  # (k, N_c)
    tau: float
    final_objective: float
    objective_history: tuple


def _objective(x, d, a, tau) -> float:
    return float(np.sum((x - d @ a) ** 2) + tau * np.sum(a**2))


def learn_dictionary(
    class_block: np.ndarray,
    k: int,
    tau: float,
    iters: int = 30,
    seed: int = 0,
) -> ClassDictionary:
    """Alternating least squares from a seeded column-subset start.

    A-step: A = (D^T D + tau I)^-1 D^T X; D-step: D = X A^T (A A^T + eps I)^-1.
    Atoms are rescaled to unit norm at the end, codes inversely.
    """
    x = np.asarray(class_block, dtype=np.float64)
    q, n = x.shape
    if not 1 <= k <= n:
        raise InvalidAtomCount(f"atom count {k} outside [1, {n}]")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    d = x[:, np.sort(rng.choice(n, size=k, replace=False))].copy()
    a = np.zeros((k, n))
    history = []
    prev = np.inf
    for _ in range(iters):
        dtd = d.T @ d
        dtd = (dtd + dtd.T) / 2
        dtd[np.diag_indices_from(dtd)] += tau
        a = solve_spd(dtd, d.T @ x)
        aat = a @ a.T
        aat = (aat + aat.T) / 2
        aat[np.diag_indices_from(aat)] += _DSTEP_EPS
        d = solve_spd(aat, a @ x.T).T
        obj = _objective(x, d, a, tau)
        assert obj <= prev * (1 + 1e-9) + 1e-12, "ALS objective increased"
        history.append(obj)
        prev = obj
    norms = np.linalg.norm(d, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    d = d / safe
    a = a * safe[:, None]
    return ClassDictionary(
        atoms=d,
        codes=a,
        tau=tau,
        final_objective=_objective(x, d, a, tau),
        objective_history=tuple(history),
    )


def compact_dataset(
    train: ClassPartitionedDataset,
    k_per_class: int,
    tau: float,
    iters: int = 30,
    seed: int = 0,
) -> ClassPartitionedDataset:
    """Replace every class block with its learned atoms.

    Per-class seeds derive from ``seed`` + class index, so the result is
    reproducible end to end.
    """
    atoms, labels = [], []
    for c in range(train.n_classes):
        dico = learn_dictionary(
            train.class_block(c), k_per_class, tau, iters, seed + c
        )
        atoms.append(dico.atoms)
        labels.extend([train.class_labels[c]] * k_per_class)
    return from_labeled_columns(np.hstack(atoms), np.asarray(labels))
