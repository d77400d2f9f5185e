"""Gradient-boosted decision trees on second-order logistic loss, from scratch.

Each round fits one depth-limited tree to the gradient/hessian statistics of
the logistic loss at the current margins (g = p - y, h = p(1 - p), starting
from margin 0 so p = 0.5). Split quality and leaf weights follow the
second-order formulation: with T the L1 soft-threshold by ``reg_alpha``,

    leaf weight  w(G, H) = -T(G) / (H + reg_lambda)
    split gain   1/2 [ S(G_L,H_L) + S(G_R,H_R) - S(G,H) ] - gamma,
                 S(G, H) = T(G)^2 / (H + reg_lambda)

Splits with non-positive gain, or with a child hessian sum below
``min_child_weight``, are rejected.

Split candidates come from per-feature histograms: when a feature has at
most ``max_bins`` distinct training values the candidate thresholds are the
exact midpoints between consecutive values, otherwise up to ``max_bins``
quantile boundaries are used. Rows and columns are subsampled per round by a
generator seeded from ``random_state``, and all tie-breaks are
first-in-scan-order (lower feature index, then lower threshold), so training
is bit-reproducible. Trees are stored as implicit complete binary trees
(node k has children 2k+1 and 2k+2) with the *unscaled* leaf weights; the
learning rate is applied when margins are accumulated.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


def _make_bins(X, max_bins):
    """Bin each column; returns (bin codes, cut values, cuts-per-column).

    ``cuts[f, :n_cuts[f]]`` are ascending thresholds; bin b holds values in
    (cuts[b-1], cuts[b]], i.e. code = #cuts <= x, so "x < cuts[b]" and
    "code <= b" agree on the training data.
    """
    n, d = X.shape
    codes = np.empty((n, d), np.int32)
    cuts = np.zeros((d, max_bins - 1), np.float64)
    n_cuts = np.zeros(d, np.int32)
    qpos = (np.linspace(0.0, 1.0, max_bins + 1)[1:-1] * (n - 1)).astype(np.int64)
    for f in range(d):
        col = X[:, f]
        svals = np.sort(col)
        boundary = np.flatnonzero(svals[1:] != svals[:-1])
        if boundary.size < max_bins:
            # exact: midpoints between consecutive distinct values
            c = 0.5 * (svals[boundary] + svals[boundary + 1])
        else:
            # quantile order statistics, deduplicated
            c = np.unique(svals[qpos])
        codes[:, f] = np.searchsorted(c, col, side="right")
        cuts[f, : c.size] = c
        n_cuts[f] = c.size
    return codes, cuts, n_cuts


@njit(cache=True, inline="always", fastmath=True)
def _thresholded(G, alpha):
    if G > alpha:
        return G - alpha
    if G < -alpha:
        return G + alpha
    return 0.0


@njit(cache=True, inline="always", fastmath=True)
def _leaf_score(G, H, alpha, lam):
    denom = H + lam
    if denom <= 0.0:
        return 0.0
    t = _thresholded(G, alpha)
    return t * t / denom


@njit(cache=True, inline="always", fastmath=True)
def _leaf_weight(G, H, alpha, lam):
    denom = H + lam
    if denom <= 0.0:
        return 0.0
    return -_thresholded(G, alpha) / denom


@njit(cache=True, fastmath=True)
def _boost(
    codes_t, cuts, n_cuts, y01,
    row_samples, col_samples,
    max_depth, min_child_weight, split_gamma, alpha, lam, learning_rate, max_bins,
    feats, thrs, values, split_bins, losses, track_loss,
):
    d, n = codes_t.shape
    n_rounds = row_samples.shape[0]
    n_slots = feats.shape[1]
    max_width = 1 << (max_depth - 1) if max_depth > 1 else 1

    margins = np.zeros(n)
    g = np.empty(n)
    h = np.empty(n)
    row_node = np.empty(n, np.int32)
    w_of_row = np.empty(n, np.int32)
    cols = np.empty(d, np.int32)
    # interleaved (g, h) pairs keep each increment on one cache line
    hist = np.zeros((max_width, d, max_bins, 2))
    node_G = np.empty(n_slots)
    node_H = np.empty(n_slots)
    present = np.zeros(n_slots, np.bool_)
    best_gain = np.empty(n_slots)
    best_feat = np.empty(n_slots, np.int32)
    best_bin = np.empty(n_slots, np.int32)
    best_Gl = np.empty(n_slots)
    best_Hl = np.empty(n_slots)

    for t in range(n_rounds):
        n_cols = 0
        for f in range(d):
            if col_samples[t, f]:
                cols[n_cols] = f
                n_cols += 1
        for k in range(n_slots):
            present[k] = False
            feats[t, k] = -1
            thrs[t, k] = 0.0
            values[t, k] = 0.0
            split_bins[t, k] = -1
        present[0] = True
        node_G[0] = 0.0
        node_H[0] = 0.0
        # this pass also finalizes the previous round's training loss, so the
        # margin-update loop below stays free of transcendentals
        prev_loss = 0.0
        for r in range(n):
            p = 1.0 / (1.0 + np.exp(-margins[r]))
            g[r] = p - y01[r]
            h[r] = p * (1.0 - p)
            if track_loss:
                q = p if y01[r] > 0.5 else 1.0 - p
                prev_loss -= np.log(q + 1e-300)
            if row_samples[t, r]:
                row_node[r] = 0
                node_G[0] += g[r]
                node_H[0] += h[r]
            else:
                row_node[r] = -1
        if track_loss and t > 0:
            losses[t - 1] = prev_loss / n

        for depth in range(max_depth):
            lo = (1 << depth) - 1
            hi = (1 << (depth + 1)) - 1
            width = hi - lo
            any_present = False
            for k in range(lo, hi):
                if present[k]:
                    any_present = True
                    best_gain[k] = 0.0
                    best_feat[k] = -1
            if not any_present:
                break
            for r in range(n):
                k = row_node[r]
                w_of_row[r] = k - lo if k >= lo else -1
            for ci in range(n_cols):
                f = cols[ci]
                nb = n_cuts[f] + 1
                for w in range(width):
                    for b in range(nb):
                        hist[w, f, b, 0] = 0.0
                        hist[w, f, b, 1] = 0.0
                for r in range(n):
                    w = w_of_row[r]
                    if w >= 0:
                        b = codes_t[f, r]
                        hist[w, f, b, 0] += g[r]
                        hist[w, f, b, 1] += h[r]
            for k in range(lo, hi):
                if not present[k]:
                    continue
                w = k - lo
                parent_score = _leaf_score(node_G[k], node_H[k], alpha, lam)
                for ci in range(n_cols):
                    f = cols[ci]
                    Gl = 0.0
                    Hl = 0.0
                    for b in range(n_cuts[f]):
                        Gl += hist[w, f, b, 0]
                        Hl += hist[w, f, b, 1]
                        Hr = node_H[k] - Hl
                        if Hl < min_child_weight or Hr < min_child_weight:
                            continue
                        Gr = node_G[k] - Gl
                        gain = (
                            0.5 * (_leaf_score(Gl, Hl, alpha, lam) + _leaf_score(Gr, Hr, alpha, lam) - parent_score)
                            - split_gamma
                        )
                        if gain > 0.0 and gain > best_gain[k]:
                            best_gain[k] = gain
                            best_feat[k] = f
                            best_bin[k] = b
                            best_Gl[k] = Gl
                            best_Hl[k] = Hl
            n_split = 0
            for k in range(lo, hi):
                if present[k] and best_feat[k] >= 0:
                    f = best_feat[k]
                    feats[t, k] = f
                    split_bins[t, k] = best_bin[k]
                    thrs[t, k] = cuts[f, best_bin[k]]
                    lc = 2 * k + 1
                    rc = 2 * k + 2
                    present[lc] = True
                    present[rc] = True
                    node_G[lc] = best_Gl[k]
                    node_H[lc] = best_Hl[k]
                    node_G[rc] = node_G[k] - best_Gl[k]
                    node_H[rc] = node_H[k] - best_Hl[k]
                    n_split += 1
            if n_split == 0:
                break
            for r in range(n):
                k = row_node[r]
                if lo <= k < hi:
                    if feats[t, k] >= 0:
                        if codes_t[feats[t, k], r] <= split_bins[t, k]:
                            row_node[r] = 2 * k + 1
                        else:
                            row_node[r] = 2 * k + 2
                    else:
                        row_node[r] = -1
        for k in range(n_slots):
            if present[k] and feats[t, k] < 0:
                values[t, k] = _leaf_weight(node_G[k], node_H[k], alpha, lam)
        # update margins on the full training set
        for r in range(n):
            k = 0
            while feats[t, k] >= 0:
                if codes_t[feats[t, k], r] <= split_bins[t, k]:
                    k = 2 * k + 1
                else:
                    k = 2 * k + 2
            margins[r] += learning_rate * values[t, k]
    # loss after the final round
    if track_loss:
        final_loss = 0.0
        for r in range(n):
            p = 1.0 / (1.0 + np.exp(-margins[r]))
            q = p if y01[r] > 0.5 else 1.0 - p
            final_loss -= np.log(q + 1e-300)
        losses[n_rounds - 1] = final_loss / n


@njit(cache=True, fastmath=True)
def _ensemble_margins(X, feats, thrs, values, learning_rate, out):
    for t in range(feats.shape[0]):
        for r in range(X.shape[0]):
            k = 0
            while feats[t, k] >= 0:
                if X[r, feats[t, k]] < thrs[t, k]:
                    k = 2 * k + 1
                else:
                    k = 2 * k + 2
            out[r] += learning_rate * values[t, k]


class BoostedTreesClassifier(BaseEstimator, ClassifierMixin):
    """Binary gradient-boosted trees; the decision value is the boosted margin.

    Features are used unstandardized (split points are scale-invariant). With
    ``track_loss=True``, ``train_loss_`` records the mean logistic loss on
    the training set after each round.
    """

    def __init__(
        self,
        n_rounds=100,
        max_depth=3,
        learning_rate=0.1,
        min_child_weight=1.0,
        gamma=0.0,
        subsample=1.0,
        colsample=1.0,
        reg_alpha=0.0,
        reg_lambda=1.0,
        max_bins=64,
        random_state=0,
        track_loss=False,
    ):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_child_weight = min_child_weight
        self.gamma = gamma
        self.subsample = subsample
        self.colsample = colsample
        self.reg_alpha = reg_alpha
        self.reg_lambda = reg_lambda
        self.max_bins = max_bins
        self.random_state = random_state
        self.track_loss = track_loss

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"training data must contain exactly 2 classes, got {classes.size}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.classes_ = classes
        y01 = (y == classes[1]).astype(float)
        n, d = X.shape
        rng = np.random.default_rng(self.random_state)
        codes, cuts, n_cuts = _make_bins(X, self.max_bins)
        codes_t = np.ascontiguousarray(codes.T)
        # rows are kept independently with probability ``subsample`` per round;
        # columns as an exact fraction. Draws never depend on the labels, so a
        # label flip with the same seed reproduces the same trees mirrored.
        if self.subsample < 1.0:
            keys = rng.random((self.n_rounds, n))
            row_samples = keys < self.subsample
            empty = ~row_samples.any(axis=1)
            if empty.any():
                row_samples[empty, np.argmin(keys[empty], axis=1)] = True
        else:
            row_samples = np.ones((self.n_rounds, n), np.bool_)
        n_sel = max(1, int(self.colsample * d))
        if n_sel < d:
            col_samples = np.zeros((self.n_rounds, d), np.bool_)
            picks = np.argsort(rng.random((self.n_rounds, d)), axis=1)[:, :n_sel]
            np.put_along_axis(col_samples, picks, True, axis=1)
        else:
            col_samples = np.ones((self.n_rounds, d), np.bool_)
        n_slots = (1 << (self.max_depth + 1)) - 1
        feats = np.empty((self.n_rounds, n_slots), np.int32)
        thrs = np.empty((self.n_rounds, n_slots), np.float64)
        values = np.empty((self.n_rounds, n_slots), np.float64)
        split_bins = np.empty((self.n_rounds, n_slots), np.int32)
        losses = np.empty(self.n_rounds, np.float64)
        _boost(
            codes_t, cuts, n_cuts, y01,
            row_samples, col_samples,
            int(self.max_depth), float(self.min_child_weight), float(self.gamma),
            float(self.reg_alpha), float(self.reg_lambda), float(self.learning_rate), int(self.max_bins),
            feats, thrs, values, split_bins, losses, bool(self.track_loss),
        )
        self.tree_feats_ = feats
        self.tree_thrs_ = thrs
        self.tree_values_ = values
        self.train_loss_ = losses.tolist() if self.track_loss else None
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "tree_feats_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was trained with {self.n_features_in_}")
        out = np.zeros(X.shape[0])
        _ensemble_margins(X, self.tree_feats_, self.tree_thrs_, self.tree_values_, float(self.learning_rate), out)
        return out

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores > 0, self.classes_[1], self.classes_[0])
