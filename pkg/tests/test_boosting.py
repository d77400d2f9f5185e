"""Boosted trees: hand-derived stump arithmetic, regularization limits,
determinism, and loss monotonicity."""

import numpy as np
import pytest

from ntpdetect.boosting import BoostedTreesClassifier
from ntpdetect.metrics import auc_roc


def stump_config(**overrides):
    base = dict(
        n_rounds=1,
        max_depth=1,
        learning_rate=0.3,
        min_child_weight=0.0,
        gamma=0.0,
        subsample=1.0,
        colsample=1.0,
        reg_alpha=0.0,
        reg_lambda=1.0,
        random_state=0,
    )
    base.update(overrides)
    return BoostedTreesClassifier(**base)


class TestStumpArithmetic:
    def test_leaf_weights_match_hand_derivation(self):
        # Two points per class around x=0. At margin 0, p=1/2, so per-row
        # g = 1/2 - y and h = 1/4: left leaf G=1, H=1/2; right G=-1, H=1/2.
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        m = stump_config().fit(X, y)
        feats, values = m.tree_feats_[0], m.tree_values_[0]
        assert feats[0] == 0 and feats[1] == -1 and feats[2] == -1
        assert values[1] == pytest.approx(-1.0 / 1.5)
        assert values[2] == pytest.approx(1.0 / 1.5)
        # margins are the learning-rate-scaled leaf weights
        np.testing.assert_allclose(m.decision_function(X), 0.3 * np.array([-1, -1, 1, 1]) / 1.5)

    def test_split_threshold_between_classes(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        m = stump_config().fit(X, y)
        assert m.tree_thrs_[0][0] == pytest.approx(0.0)

    def test_alpha_soft_threshold_shrinks_leaves(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        m = stump_config(reg_alpha=0.4).fit(X, y)
        # |G|=1 shrinks to 0.6 before dividing by H + lambda = 1.5
        assert m.tree_values_[0][1] == pytest.approx(-0.6 / 1.5)
        assert m.tree_values_[0][2] == pytest.approx(0.6 / 1.5)

    def test_large_gamma_yields_constant_score(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] > 0).astype(int)
        m = stump_config(n_rounds=5, gamma=1e6).fit(X, y)
        scores = m.decision_function(X)
        assert np.all(scores == scores[0])

    def test_min_child_weight_blocks_unbalanced_splits(self):
        # only 1 row can sit left of any split on this X; h sums to 1/4 there
        X = np.array([[0.0], [1.0], [1.0], [1.0], [1.0], [2.0]])
        y = np.array([0, 1, 0, 1, 0, 1])
        m = stump_config(min_child_weight=0.6).fit(X, y)
        assert m.tree_feats_[0][0] == -1  # no admissible split: stays a leaf


class TestBoostingBehavior:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(80, 4))
        y = (X[:, 0] + 0.5 * rng.normal(size=80) > 0).astype(int)
        kw = dict(n_rounds=20, subsample=0.7, colsample=0.7, random_state=11)
        m1 = BoostedTreesClassifier(**kw).fit(X, y)
        m2 = BoostedTreesClassifier(**kw).fit(X, y)
        assert np.array_equal(m1.tree_feats_, m2.tree_feats_)
        assert np.array_equal(m1.tree_thrs_, m2.tree_thrs_)
        assert np.array_equal(m1.tree_values_, m2.tree_values_)

    def test_seed_changes_subsampled_ensemble(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(80, 4))
        y = (X[:, 0] > 0).astype(int)
        m1 = BoostedTreesClassifier(n_rounds=10, subsample=0.6, random_state=1).fit(X, y)
        m2 = BoostedTreesClassifier(n_rounds=10, subsample=0.6, random_state=2).fit(X, y)
        assert not np.array_equal(m1.tree_thrs_, m2.tree_thrs_)

    def test_train_loss_non_increasing_with_full_sampling(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(100, 5))
        y = (X[:, 0] + X[:, 1] + rng.normal(size=100) > 0).astype(int)
        m = BoostedTreesClassifier(n_rounds=60, subsample=1.0, colsample=1.0, learning_rate=0.2, track_loss=True).fit(X, y)
        losses = np.array(m.train_loss_)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_label_flip_reverses_ranking(self):
        # split gains are symmetric under g -> -g, so the flipped model mirrors
        # the original up to float round-off in near-tied split choices
        rng = np.random.default_rng(4)
        X = rng.normal(size=(60, 3))
        y = (X[:, 0] > 0).astype(int)
        kw = dict(n_rounds=15, subsample=0.7, colsample=0.7, random_state=5)
        a = BoostedTreesClassifier(**kw).fit(X, y).decision_function(X)
        b = BoostedTreesClassifier(**kw).fit(X, 1 - y).decision_function(X)
        assert auc_roc(a, y.astype(bool)) == pytest.approx(1.0 - auc_roc(b, y.astype(bool)), abs=1e-3)
        assert np.corrcoef(a, b)[0, 1] < -0.99

    def test_learns_nonlinear_signal(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(300, 2))
        y = ((X[:, 0] * X[:, 1]) > 0).astype(int)  # XOR-like
        m = BoostedTreesClassifier(n_rounds=50, max_depth=3, learning_rate=0.2).fit(X, y)
        assert auc_roc(m.decision_function(X), y.astype(bool)) > 0.95

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="2 classes"):
            BoostedTreesClassifier().fit(np.zeros((4, 2)), [0, 0, 0, 0])

    def test_scores_finite(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(50, 3))
        y = (rng.random(50) < 0.4).astype(int)
        y[0], y[1] = 0, 1
        m = BoostedTreesClassifier(n_rounds=30, reg_lambda=1.0).fit(X, y)
        assert np.all(np.isfinite(m.decision_function(X)))

    def test_arity_mismatch_rejected(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(20, 2))
        y = (X[:, 0] > 0).astype(int)
        m = BoostedTreesClassifier(n_rounds=3).fit(X, y)
        with pytest.raises(ValueError, match="features"):
            m.decision_function(np.zeros((2, 9)))
