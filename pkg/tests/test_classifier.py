import numpy as np
import pytest

from ldsr.classifier import (
    LdsrClassifier,
    classify,
    classify_batch,
    class_scores,
    decision_from_scores,
    locality_size,
    select_locality,
    select_smallest,
)
from ldsr.dataset import from_labeled_columns
from ldsr.errors import AllScoresInfinite, DimensionMismatch
from ldsr.solver import HyperParams, residual_distances, solve
from conftest import gaussian_blobs, make_dataset


class TestSelection:
    def test_order_statistics(self):
        sel = select_smallest(np.array([0.1, 0.5, 0.3]), 2)
        assert list(sel) == [0, 2]

    def test_tie_goes_to_lower_index(self):
        d = np.array([0.1, 0.2, 0.2, 0.3, 0.3, 0.9, 0.4, 0.3])
        # one slot left after {0.1, 0.2, 0.2}: tie at 0.3 between 3, 4, 7
        sel = select_smallest(d, 4)
        assert list(sel) == [0, 1, 2, 3]

    def test_locality_size_rounding(self):
        assert locality_size(1.0, 7) == 7
        assert locality_size(0.3, 10) == 3
        assert locality_size(0.25, 10) == 3  # halves round up
        assert locality_size(0.01, 10) == 1  # never below one sample

    def test_selection_matches_residual_distances(self, rng):
        train = make_dataset(rng, 6, (4, 3, 5))
        x = rng.standard_normal(6)
        hp = HyperParams(lam=0.2, eta=0.1, gamma=0.1, locality_fraction=0.5)
        loc = select_locality(train, x, hp)
        d = residual_distances(train, x, solve(train, x, hp))
        expected = np.sort(np.argsort(d, kind="stable")[: locality_size(0.5, 12)])
        np.testing.assert_array_equal(loc.selected_indices, expected)

    def test_full_fraction_keeps_everything(self, rng):
        train = make_dataset(rng, 5, (3, 3))
        x = rng.standard_normal(5)
        hp = HyperParams(locality_fraction=1.0)
        loc = select_locality(train, x, hp)
        np.testing.assert_array_equal(loc.selected_indices, np.arange(6))
        np.testing.assert_array_equal(loc.surviving_classes, [0, 1])
        np.testing.assert_allclose(loc.subset.features, train.features)


class TestDecisionRule:
    def test_ranking_and_prediction(self):
        labels = np.array([0, 1, 2])
        decision = decision_from_scores(labels, np.array([0.5, 0.1, np.inf]))
        assert decision.predicted == 1
        assert list(decision.ranking) == [1, 0, 2]

    def test_tie_prefers_lowest_class_id(self):
        labels = np.array([3, 5, 9])
        decision = decision_from_scores(labels, np.array([0.2, 0.1, 0.1]))
        assert decision.predicted == 5
        assert list(decision.ranking) == [5, 9, 3]

    def test_all_infinite_raises(self):
        with pytest.raises(AllScoresInfinite):
            decision_from_scores(np.array([0, 1]), np.array([np.inf, np.inf]))

    def test_positive_scaling_invariance(self, rng):
        labels = np.arange(5)
        scores = rng.random(5)
        base = decision_from_scores(labels, scores)
        scaled = decision_from_scores(labels, 37.5 * scores)
        assert base.predicted == scaled.predicted
        np.testing.assert_array_equal(base.ranking, scaled.ranking)

    def test_zero_coefficient_block_scores_infinite(self, rng):
        # beta identically zero on one class block must yield inf, not 0/0
        gram = np.eye(4)
        scores = class_scores(
            n_classes=2,
            surviving=np.array([0, 1]),
            sub_offsets=np.array([0, 2, 4]),
            beta=np.array([0.0, 0.0, 0.5, 0.5]),
            rhs=np.ones(4),
            gram=gram,
            query_sq=1.0,
        )
        assert np.isinf(scores[0])
        assert np.isfinite(scores[1])


class TestClassify:
    def test_separated_classes(self, rng):
        # classes around e1 and e2 in R^10 with tiny noise; query near e1
        means = np.zeros((10, 2))
        means[0, 0] = 1.0
        means[1, 1] = 1.0
        train = gaussian_blobs(rng, means, 6, 1e-3)
        x = means[:, 0] + 1e-3 * rng.standard_normal(10)
        hp = HyperParams(lam=0.01, eta=0.01, gamma=0.01, locality_fraction=0.5)
        decision = classify(train, x, hp)
        assert decision.predicted == 0
        # brute-force nearest-subspace oracle agrees
        resid = []
        for c in range(2):
            block = train.class_block(c)
            w, *_ = np.linalg.lstsq(block, x, rcond=None)
            resid.append(np.linalg.norm(x - block @ w))
        assert int(np.argmin(resid)) == 0

    def test_training_sample_recovers_own_class(self, rng):
        # noiseless one-sample-per-class data, query equals a training sample
        train = make_dataset(rng, 8, (1, 1, 1, 1))
        hp = HyperParams(lam=0.001, eta=0.1, gamma=0.1, locality_fraction=1.0)
        for c in range(4):
            x = train.features[:, c].copy()
            assert classify(train, x, hp).predicted == c

    def test_absent_class_scores_infinite_and_never_wins(self, rng):
        means = np.zeros((12, 3))
        means[0, 0] = 1.0
        means[1, 1] = 1.0
        means[2, 2] = 1.0
        train = gaussian_blobs(rng, means, 4, 1e-3)
        x = means[:, 0] + 1e-3 * rng.standard_normal(12)
        # fraction small enough that only class-0 neighbours survive
        hp = HyperParams(lam=0.01, locality_fraction=0.25)
        decision = classify(train, x, hp)
        assert decision.predicted == 0
        assert np.isinf(decision.scores[1])
        assert np.isinf(decision.scores[2])

    def test_full_fraction_equals_direct_solve(self, rng):
        train = make_dataset(rng, 6, (3, 4, 2))
        x = rng.standard_normal(6)
        hp = HyperParams(lam=0.3, eta=0.2, gamma=0.1, locality_fraction=1.0)
        clf = LdsrClassifier(train, hp)
        rhs, alphas, d2, query_sq = clf._stage1(x[:, None])
        sel = select_smallest(d2[:, 0], clf.size)
        assert len(sel) == train.n_samples
        direct = solve(train, x, hp)
        decision = clf.decide(x)
        # stage-2 scores recomputed from the direct full-set coefficients
        for c in range(train.n_classes):
            bc = direct.class_coeffs(c)
            expected = np.linalg.norm(
                x - train.class_block(c) @ bc
            ) / np.linalg.norm(bc)
            assert decision.scores[c] == pytest.approx(expected, rel=1e-8)

    def test_stage2_uses_surviving_class_count(self, rng):
        # query close to classes 0 and 1 only; locality keeps 2 of 3 classes.
        # the stage-2 coefficients must match a direct solve on the subset
        # dataset, whose class count is 2 (not the original 3).
        means = np.zeros((10, 3))
        means[0, 0] = 1.0
        means[1, 1] = 1.0
        means[2, 2] = 1.0
        train = gaussian_blobs(rng, means, 4, 1e-2)
        x = (means[:, 0] + means[:, 1]) / 2.0
        hp = HyperParams(lam=0.1, eta=0.2, gamma=0.5, locality_fraction=0.5)
        loc = select_locality(train, x, hp)
        assert list(loc.surviving_classes) == [0, 1]
        decision = classify(train, x, hp)
        direct = solve(loc.subset, x, hp)
        for j, c in enumerate(loc.surviving_classes):
            bc = direct.class_coeffs(j)
            expected = np.linalg.norm(
                x - loc.subset.class_block(j) @ bc
            ) / np.linalg.norm(bc)
            assert decision.scores[c] == pytest.approx(expected, rel=1e-7)

    def test_determinism(self, rng):
        train = make_dataset(rng, 6, (3, 3, 3))
        x = rng.standard_normal(6)
        hp = HyperParams()
        a = classify(train, x, hp)
        b = classify(train, x, hp)
        assert a.predicted == b.predicted
        np.testing.assert_array_equal(a.scores, b.scores)
        np.testing.assert_array_equal(a.ranking, b.ranking)


class TestBatch:
    def test_batch_of_one_equals_single(self, rng):
        train = make_dataset(rng, 5, (3, 3))
        x = rng.standard_normal(5)
        hp = HyperParams()
        single = classify(train, x, hp)
        batch = classify_batch(train, x[:, None], hp)
        assert len(batch) == 1
        np.testing.assert_array_equal(single.scores, batch[0].scores)

    def test_permutation_equivariance(self, rng):
        # scores agree up to BLAS rounding (batch layout may change the
        # reduction order); predictions and rankings agree exactly
        train = make_dataset(rng, 5, (3, 3))
        queries = rng.standard_normal((5, 4))
        hp = HyperParams()
        base = classify_batch(train, queries, hp)
        perm = [3, 0, 2, 1]
        shuffled = classify_batch(train, queries[:, perm], hp)
        for i, j in enumerate(perm):
            np.testing.assert_allclose(
                shuffled[i].scores, base[j].scores, rtol=1e-10
            )
            assert shuffled[i].predicted == base[j].predicted
            np.testing.assert_array_equal(shuffled[i].ranking, base[j].ranking)

    def test_empty_batch(self, rng):
        train = make_dataset(rng, 5, (3, 3))
        assert classify_batch(train, np.empty((5, 0)), HyperParams()) == []

    def test_dimension_mismatch(self, rng):
        train = make_dataset(rng, 5, (3, 3))
        with pytest.raises(DimensionMismatch):
            classify_batch(train, np.zeros((4, 2)), HyperParams())
