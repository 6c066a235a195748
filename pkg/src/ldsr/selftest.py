"""Built-in oracle suite behind the ``selftest`` CLI command.

Each check exercises one verification route (closed form vs explicit
loop, analytic gradient vs finite differences, reduction identities) on
seeded random instances and reports its worst residual. ``corrupt``
perturbs a named input as a negative control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel, solver
from .dataset import ClassPartitionedDataset, from_labeled_columns

_SEED = 20240117


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def random_instance(rng, q=None, m=None, counts=None, lam=None, eta=None, gamma=None):
    """Random dataset/query/hyperparameter triple for oracle checks."""
    q = q or int(rng.integers(5, 21))
    m = m or int(rng.integers(2, 6))
    counts = counts if counts is not None else rng.integers(1, 7, size=m)
    labels = np.repeat(np.arange(m), counts)
    train = from_labeled_columns(rng.standard_normal((q, len(labels))), labels)
    x = rng.standard_normal(q)
    hp = solver.HyperParams(
        lam=lam if lam is not None else float(rng.choice([0.01, 1.0])),
        eta=eta if eta is not None else float(rng.choice([0.0, 0.1, 1.0])),
        gamma=gamma if gamma is not None else float(rng.choice([0.0, 0.1, 1.0])),
    )
    return train, x, hp


def fd_gradient(train, x, alpha, hp, step_scale=1e-6) -> np.ndarray:
    """Central finite differences of the objective."""
    g = np.empty_like(alpha)
    for k in range(len(alpha)):
        h = step_scale * (1.0 + abs(alpha[k]))
        up, down = alpha.copy(), alpha.copy()
        up[k] += h
        down[k] -= h
        g[k] = (
            solver.objective(train, x, up, hp)
            - solver.objective(train, x, down, hp)
        ) / (2 * h)
    return g


def leave_one_in_block(xc: np.ndarray) -> np.ndarray:
    """Explicit sum over leave-one-in copies (column i zeroed)."""
    n = xc.shape[1]
    out = np.zeros((n, n))
    for i in range(n):
        bar = xc.copy()
        bar[:, i] = 0.0
        out += bar.T @ bar
    return out


def check_block_identity(rng) -> CheckResult:
    worst = 0.0
    for n in (1, 2, 3, 5, 10):
        xc = rng.standard_normal((8, n))
        labels = np.concatenate((np.zeros(n, int), [1]))
        train = from_labeled_columns(
            np.hstack((xc, rng.standard_normal((8, 1)))), labels
        )
        closed = solver.build_blocks(train).within[0]
        worst = max(worst, float(np.max(np.abs(closed - leave_one_in_block(xc)))))
    return CheckResult("h1-block-identity", worst, 1e-10)


def check_stationarity(rng, instances=30) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        train, x, hp = random_instance(rng)
        sol = solver.solve(train, x, hp)
        worst = max(worst, sol.grad_inf_norm / (1.0 + abs(sol.objective)))
    return CheckResult("stationarity", worst, 1e-8)


def _fd_residual(train, x, hp, rng, corrupt=None) -> float:
    alpha = rng.standard_normal(train.n_samples)
    g = solver.gradient(train, x, alpha, hp)
    if corrupt == "gradient":
        g = g + 1e-3 * (1.0 + np.abs(g))  # scale-proof perturbation
    fd = fd_gradient(train, x, alpha, hp)
    return float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))))


def check_gradient_fd(rng, corrupt=None, instances=10) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        train, x, hp = random_instance(rng)
        worst = max(worst, _fd_residual(train, x, hp, rng, corrupt))
    return CheckResult("gradient-fd-linear", worst, 1e-5)


def check_gradient_fd_kernel(rng, corrupt=None, instances=5) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        train, x, hp = random_instance(rng)
        gram = kernel.build_gram(train, sigma=None)
        kvec = kernel.query_vector(train, x, gram.sigma)
        gram_ds = ClassPartitionedDataset(
            features=gram.gram,
            class_labels=gram.class_labels,
            offsets=gram.offsets,
        )
        worst = max(worst, _fd_residual(gram_ds, kvec.vec, hp, rng, corrupt))
    return CheckResult("gradient-fd-kernel", worst, 1e-5)


def check_ridge_reduction(rng, instances=10) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        train, x, hp = random_instance(rng, eta=0.0, gamma=0.0)
        sol = solver.solve(train, x, hp)
        gram = train.features.T @ train.features
        gram[np.diag_indices_from(gram)] += hp.lam
        ridge = np.linalg.solve(gram, train.features.T @ x)
        worst = max(worst, float(np.max(np.abs(sol.coeffs - ridge))))
    return CheckResult("ridge-reduction", worst, 1e-10)


def check_between_inert_m2(rng, instances=5) -> CheckResult:
    """With two classes the between-class blocks must not matter."""
    worst = 0.0
    for _ in range(instances):
        train, x, hp = random_instance(rng, m=2, gamma=1.0)
        blocks = solver.build_blocks(train)
        junk = tuple(
            b + np.eye(b.shape[0]) * 7.5 for b in blocks.between
        )
        perturbed = solver.RegularizerBlocks(blocks.within, junk, blocks.offsets)
        base = solver.solve(train, x, hp, blocks=blocks).coeffs
        moved = solver.solve(train, x, hp, blocks=perturbed).coeffs
        worst = max(worst, float(np.max(np.abs(base - moved))))
    return CheckResult("between-inert-m2", worst, 1e-12)


def check_kernel_distance_linear(rng, instances=10) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        train, x, _ = random_instance(rng)
        i = int(rng.integers(train.n_samples))
        coeff = float(rng.standard_normal())
        kd = kernel.kernel_distance(train, x, i, coeff, kind="linear")
        direct = float(np.linalg.norm(x - train.features[:, i] * coeff))
        worst = max(worst, abs(kd - direct))
    return CheckResult("kernel-distance-linear", worst, 1e-10)


def run_selftest(corrupt: str | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(_SEED)
    return [
        check_block_identity(rng),
        check_stationarity(rng),
        check_gradient_fd(rng, corrupt),
        check_gradient_fd_kernel(rng, corrupt),
        check_ridge_reduction(rng),
        check_between_inert_m2(rng),
        check_kernel_distance_linear(rng),
    ]
