"""Penalized logistic regression trained from scratch.

The objective is the mean logistic loss plus (1/C) times the penalty:

    J(w, b) = mean_i log(1 + exp(-z_i (x_i . w + b))) + (1/C) R(w)

with z_i in {-1, +1}, R(w) = 0.5 ||w||^2 for the L2 penalty and ||w||_1 for
L1; the intercept is never penalized. L2 uses damped Newton iterations with
a backtracking line search (so the objective decreases monotonically); L1
uses cyclic coordinate descent with soft-thresholding on a curvature upper
bound (p(1-p) <= 1/4), which majorizes the loss and therefore also descends.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .preprocessing import standardize_apply, standardize_fit

PENALTIES = ("l1", "l2")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_objective(w, b, X, y01, C, penalty):
    """Exact objective value; shared with the tests' independent minimizer."""
    margins = X @ w + b
    z = np.where(y01 > 0.5, 1.0, -1.0)
    loss = float(np.logaddexp(0.0, -z * margins).mean())
    if penalty == "l2":
        reg = 0.5 * float(w @ w)
    else:
        reg = float(np.abs(w).sum())
    return loss + reg / C


def _soft_threshold(u, t):
    if u > t:
        return u - t
    if u < -t:
        return u + t
    return 0.0


class LogisticRegressionClassifier(BaseEstimator, ClassifierMixin):
    """Binary logistic regression with an L1 or L2 penalty.

    Parameters
    ----------
    C : float
        Inverse penalty weight; larger C means less regularization.
    penalty : {'l2', 'l1'}
    tol : float
        Convergence threshold on the largest parameter change per iteration.
    max_iter : int
        Iteration cap (Newton steps for L2, full coordinate cycles for L1).
    standardize : bool
        Fit per-feature standardization on the training data and replay it at
        scoring time.
    """

    def __init__(self, C=1.0, penalty="l2", tol=1e-6, max_iter=1000, standardize=True):
        self.C = C
        self.penalty = penalty
        self.tol = tol
        self.max_iter = max_iter
        self.standardize = standardize

    def fit(self, X, y):
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        X, y = check_X_y(X, y, dtype=float)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"training data must contain exactly 2 classes, got {classes.size}")
        self.classes_ = classes
        y01 = (y == classes[1]).astype(float)
        if self.standardize:
            self.scaler_mean_, self.scaler_std_ = standardize_fit(X)
            Xs = standardize_apply(X, self.scaler_mean_, self.scaler_std_)
        else:
            self.scaler_mean_ = self.scaler_std_ = None
            Xs = X
        if self.penalty == "l2":
            w, b, n_iter, objs = self._fit_l2(Xs, y01)
        else:
            w, b, n_iter, objs = self._fit_l1(Xs, y01)
        self.coef_ = w
        self.intercept_ = b
        self.n_iter_ = n_iter
        self.objective_path_ = objs
        self.n_features_in_ = X.shape[1]
        return self

    def _fit_l2(self, X, y01):
        n, d = X.shape
        theta = np.zeros(d + 1)  # [w, b]
        Xa = np.hstack([X, np.ones((n, 1))])
        pen_mask = np.ones(d + 1)
        pen_mask[d] = 0.0
        objs = [logistic_objective(theta[:d], theta[d], X, y01, self.C, "l2")]
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            p = _sigmoid(Xa @ theta)
            grad = Xa.T @ (p - y01) / n + pen_mask * theta / self.C
            wdiag = np.maximum(p * (1.0 - p), 1e-12)
            hess = (Xa * wdiag[:, None]).T @ Xa / n + np.diag(pen_mask) / self.C
            step = np.linalg.solve(hess + 1e-12 * np.eye(d + 1), grad)
            # backtracking keeps the objective monotonically decreasing
            t = 1.0
            cur = objs[-1]
            descent = float(grad @ step)
            accepted = False
            for _ in range(60):
                cand = theta - t * step
                val = logistic_objective(cand[:d], cand[d], X, y01, self.C, "l2")
                if val <= cur - 1e-4 * t * descent:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:  # no admissible step: numerically at the optimum
                break
            theta = cand
            objs.append(val)
            if np.max(np.abs(t * step)) < self.tol:
                break
        return theta[:d].copy(), float(theta[d]), n_iter, objs

    def _fit_l1(self, X, y01):
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        margins = np.zeros(n)
        # curvature upper bound per coordinate: p(1-p) <= 1/4
        curv = np.maximum(0.25 * (X * X).mean(axis=0), 1e-12)
        lam = 1.0 / self.C
        objs = [logistic_objective(w, b, X, y01, self.C, "l1")]
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            max_delta = 0.0
            for j in range(d):
                p = _sigmoid(margins)
                g = float(X[:, j] @ (p - y01)) / n
                u = curv[j] * w[j] - g
                w_new = _soft_threshold(u, lam) / curv[j]
                delta = w_new - w[j]
                if delta != 0.0:
                    margins += delta * X[:, j]
                    w[j] = w_new
                    max_delta = max(max_delta, abs(delta))
            p = _sigmoid(margins)
            delta_b = -float((p - y01).mean()) / 0.25
            b += delta_b
            margins += delta_b
            max_delta = max(max_delta, abs(delta_b))
            objs.append(logistic_objective(w, b, X, y01, self.C, "l1"))
            if max_delta < self.tol:
                break
        return w, b, n_iter, objs

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was trained with {self.n_features_in_}")
        if self.scaler_mean_ is not None:
            X = standardize_apply(X, self.scaler_mean_, self.scaler_std_)
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores > 0, self.classes_[1], self.classes_[0])
