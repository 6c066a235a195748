import numpy as np
import pytest

from ldsr.dataset import from_labeled_columns
from ldsr.errors import DimensionMismatch
from ldsr.solver import (
    CoefficientSolution,
    HyperParams,
    RegularizerBlocks,
    build_blocks,
    gradient,
    objective,
    residual_distances,
    solve,
)
from conftest import make_dataset


def naive_objective(train, x, alpha, hp):
    """Loop-by-loop restatement of the objective, used as the oracle."""
    total = np.linalg.norm(x - train.features @ alpha) ** 2
    total += hp.lam * np.linalg.norm(alpha) ** 2
    for c in range(train.n_classes):
        xc = train.class_block(c)
        ac = alpha[train.class_slice(c)]
        rep = xc @ ac
        for i in range(xc.shape[1]):
            total += hp.eta * np.linalg.norm(xc[:, i] * ac[i] - rep) ** 2
    reps = [
        train.class_block(c) @ alpha[train.class_slice(c)]
        for c in range(train.n_classes)
    ]
    for i in range(train.n_classes):
        for j in range(train.n_classes):
            if i != j:
                total += hp.gamma * np.linalg.norm(reps[i] + reps[j]) ** 2
    return total


def leave_one_in_sum(xc):
    """Sum of X^T X over copies of the class block with column i zeroed."""
    out = np.zeros((xc.shape[1], xc.shape[1]))
    for i in range(xc.shape[1]):
        bar = xc.copy()
        bar[:, i] = 0.0
        out += bar.T @ bar
    return out


def fd_gradient(train, x, alpha, hp):
    g = np.empty_like(alpha)
    for k in range(len(alpha)):
        h = 1e-6 * (1.0 + abs(alpha[k]))
        up, dn = alpha.copy(), alpha.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (naive_objective(train, x, up, hp)
                - naive_objective(train, x, dn, hp)) / (2 * h)
    return g


class TestBlocks:
    def test_orthonormal_pair_gives_identity(self):
        train = from_labeled_columns(np.eye(2), np.array([0, 0]))
        blocks = build_blocks(train)
        oracle = leave_one_in_sum(np.eye(2))
        np.testing.assert_allclose(blocks.within[0], oracle, atol=1e-12)
        np.testing.assert_allclose(blocks.within[0], np.eye(2), atol=1e-12)

    def test_single_sample_block_is_zero(self, rng):
        train = make_dataset(rng, 5, (1, 3))
        blocks = build_blocks(train)
        np.testing.assert_allclose(blocks.within[0], [[0.0]], atol=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
    def test_closed_form_matches_explicit_loop(self, rng, n):
        train = make_dataset(rng, 7, (n, 2))
        blocks = build_blocks(train)
        oracle = leave_one_in_sum(train.class_block(0))
        assert np.max(np.abs(blocks.within[0] - oracle)) < 1e-10

    def test_between_blocks_are_class_grams(self, rng):
        train = make_dataset(rng, 6, (3, 4))
        blocks = build_blocks(train)
        for c in range(2):
            xc = train.class_block(c)
            np.testing.assert_allclose(blocks.between[c], xc.T @ xc, atol=1e-12)

    def test_blocks_symmetric_psd(self, rng):
        train = make_dataset(rng, 6, (4, 3, 2))
        blocks = build_blocks(train)
        for mats in (blocks.within, blocks.between):
            for m in mats:
                assert np.max(np.abs(m - m.T)) < 1e-10
                eigs = np.linalg.eigvalsh(m)
                assert eigs.min() > -1e-8 * max(np.trace(m), 1.0)


class TestObjective:
    def test_zero_coefficients(self, rng):
        train = make_dataset(rng, 5, (2, 3))
        x = rng.standard_normal(5)
        hp = HyperParams(lam=0.7, eta=0.5, gamma=0.9)
        assert objective(train, x, np.zeros(5), hp) == pytest.approx(x @ x)

    def test_exact_reconstruction(self):
        train = from_labeled_columns(
            np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0, 1])
        )
        hp = HyperParams(lam=0.0, eta=0.0, gamma=0.0)
        val = objective(train, np.array([1.0, 0.0]), np.array([1.0, 0.0]), hp)
        assert val == pytest.approx(0.0, abs=1e-14)

    def test_matches_naive_summation(self, rng):
        for _ in range(5):
            train = make_dataset(rng, 6, rng.integers(1, 5, size=3))
            x = rng.standard_normal(6)
            alpha = rng.standard_normal(train.n_samples)
            hp = HyperParams(lam=0.3, eta=0.8, gamma=0.4)
            assert objective(train, x, alpha, hp) == pytest.approx(
                naive_objective(train, x, alpha, hp), rel=1e-10
            )

    def test_dimension_mismatch(self, rng):
        train = make_dataset(rng, 4, (2, 2))
        hp = HyperParams()
        with pytest.raises(DimensionMismatch):
            objective(train, np.zeros(5), np.zeros(4), hp)
        with pytest.raises(DimensionMismatch):
            objective(train, np.zeros(4), np.zeros(3), hp)


class TestGradient:
    def test_ridge_closed_form_is_stationary(self, rng):
        # orthonormal square X: ridge solution is X^T x / (1 + lam)
        q = 6
        basis, _ = np.linalg.qr(rng.standard_normal((q, q)))
        train = from_labeled_columns(basis, np.repeat([0, 1], q // 2))
        x = rng.standard_normal(q)
        lam = 0.9
        alpha = basis.T @ x / (1.0 + lam)
        g = gradient(train, x, alpha, HyperParams(lam=lam, eta=0.0, gamma=0.0))
        assert np.max(np.abs(g)) < 1e-12

    def test_matches_finite_differences(self, rng):
        for _ in range(5):
            train = make_dataset(rng, 5, rng.integers(1, 4, size=3))
            x = rng.standard_normal(5)
            alpha = rng.standard_normal(train.n_samples)
            hp = HyperParams(lam=0.2, eta=0.6, gamma=0.3)
            g = gradient(train, x, alpha, hp)
            fd = fd_gradient(train, x, alpha, hp)
            assert np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))) < 1e-5

    def test_solution_is_stationary(self, rng):
        train = make_dataset(rng, 8, (3, 4, 2))
        x = rng.standard_normal(8)
        hp = HyperParams(lam=0.05, eta=0.4, gamma=0.7)
        sol = solve(train, x, hp)
        g = gradient(train, x, sol.coeffs, hp)
        assert np.max(np.abs(g)) <= 1e-8 * (1.0 + abs(sol.objective))


class TestSolve:
    def test_hand_worked_two_singleton_classes(self):
        # X = I2, x = e1, lam=1, gamma=0.5, eta inert (single-sample classes):
        # system is (1+2*0.5) I + I = 3I, rhs = e1, so alpha = (1/3, 0).
        train = from_labeled_columns(np.eye(2), np.array([0, 1]))
        hp = HyperParams(lam=1.0, eta=3.0, gamma=0.5)
        sol = solve(train, np.array([1.0, 0.0]), hp)
        np.testing.assert_allclose(sol.coeffs, [1.0 / 3.0, 0.0], atol=1e-12)

    def test_ridge_reduction(self, rng):
        train = make_dataset(rng, 6, (3, 3, 2))
        x = rng.standard_normal(6)
        lam = 0.4
        sol = solve(train, x, HyperParams(lam=lam, eta=0.0, gamma=0.0))
        gram = train.features.T @ train.features + lam * np.eye(train.n_samples)
        ridge = np.linalg.solve(gram, train.features.T @ x)
        assert np.max(np.abs(sol.coeffs - ridge)) < 1e-10

    def test_local_optimality_probe(self, rng):
        train = make_dataset(rng, 7, (3, 2, 4))
        x = rng.standard_normal(7)
        hp = HyperParams(lam=0.3, eta=0.5, gamma=0.2)
        sol = solve(train, x, hp)
        base = objective(train, x, sol.coeffs, hp)
        for _ in range(100):
            delta = rng.standard_normal(train.n_samples)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert objective(train, x, sol.coeffs + delta, hp) >= base - 1e-12

    def test_lambda_monotone_shrinkage(self, rng):
        train = make_dataset(rng, 6, (4, 4))
        x = rng.standard_normal(6)
        norms = [
            np.linalg.norm(
                solve(train, x, HyperParams(lam=lam, eta=0.0, gamma=0.0)).coeffs
            )
            for lam in (0.01, 0.1, 1.0, 10.0)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_gamma_zero_system_matrix(self, rng):
        # with gamma = 0 the system reduces to X^T X + lam I + eta W
        train = make_dataset(rng, 5, (3, 2))
        x = rng.standard_normal(5)
        hp = HyperParams(lam=0.2, eta=0.7, gamma=0.0)
        sol = solve(train, x, hp)
        blocks = build_blocks(train)
        system = (
            train.features.T @ train.features
            + hp.lam * np.eye(train.n_samples)
            + hp.eta * blocks.within_dense()
        )
        direct = np.linalg.solve(system, train.features.T @ x)
        assert np.max(np.abs(sol.coeffs - direct)) < 1e-10

    def test_m2_between_term_inert(self, rng):
        train = make_dataset(rng, 5, (3, 3))
        x = rng.standard_normal(5)
        hp = HyperParams(lam=0.1, eta=0.2, gamma=0.8)
        blocks = build_blocks(train)
        junk = tuple(b + 3.0 * np.eye(b.shape[0]) for b in blocks.between)
        perturbed = RegularizerBlocks(blocks.within, junk, blocks.offsets)
        base = solve(train, x, hp, blocks=blocks)
        moved = solve(train, x, hp, blocks=perturbed)
        np.testing.assert_array_equal(base.coeffs, moved.coeffs)

    def test_singular_lambda_zero_falls_back(self, rng):
        # duplicated columns, lam = 0: Cholesky fails, the least-squares
        # fallback must still return a stationary point
        col = rng.standard_normal((4, 1))
        features = np.hstack([col, col, rng.standard_normal((4, 1))])
        train = from_labeled_columns(features, np.array([0, 0, 1]))
        x = rng.standard_normal(4)
        hp = HyperParams(lam=0.0, eta=0.0, gamma=0.0)
        sol = solve(train, x, hp)
        assert sol.grad_inf_norm <= 1e-8 * (1.0 + abs(sol.objective))

    def test_solution_partition(self, rng):
        train = make_dataset(rng, 5, (2, 3))
        sol = solve(train, rng.standard_normal(5), HyperParams())
        assert isinstance(sol, CoefficientSolution)
        assert len(sol.class_coeffs(0)) == 2
        assert len(sol.class_coeffs(1)) == 3


class TestResidualDistances:
    def test_zero_coefficient_gives_query_norm(self, rng):
        train = make_dataset(rng, 5, (2, 2))
        x = rng.standard_normal(5)
        sol = CoefficientSolution(
            coeffs=np.zeros(4), objective=0.0, grad_inf_norm=0.0,
            offsets=train.offsets,
        )
        np.testing.assert_allclose(
            residual_distances(train, x, sol), np.full(4, np.linalg.norm(x))
        )

    def test_exact_match_gives_zero(self, rng):
        train = make_dataset(rng, 5, (2, 2))
        x = train.features[:, 2].copy()
        coeffs = np.zeros(4)
        coeffs[2] = 1.0
        sol = CoefficientSolution(
            coeffs=coeffs, objective=0.0, grad_inf_norm=0.0,
            offsets=train.offsets,
        )
        d = residual_distances(train, x, sol)
        assert d[2] == pytest.approx(0.0, abs=1e-7)

    def test_matches_direct_norms(self, rng):
        train = make_dataset(rng, 6, (3, 4))
        x = rng.standard_normal(6)
        hp = HyperParams(lam=0.3, eta=0.1, gamma=0.1)
        sol = solve(train, x, hp)
        d = residual_distances(train, x, sol)
        direct = [
            np.linalg.norm(x - train.features[:, i] * sol.coeffs[i])
            for i in range(train.n_samples)
        ]
        np.testing.assert_allclose(d, direct, atol=1e-10)
