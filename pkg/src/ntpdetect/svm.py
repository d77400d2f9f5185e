"""Soft-margin SVM trained from scratch by sequential minimal optimization.

The dual

    max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
    s.t.   0 <= a_i <= C,   sum_i a_i y_i = 0

is optimized two coordinates at a time: a KKT-violating example is paired
with the example of largest error gap, the pair subproblem is solved in
closed form, and cached decision values plus the running threshold are
updated incrementally. Pair selection is fully deterministic (largest gap,
ties to the lowest index), so training is bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .preprocessing import standardize_apply, standardize_fit

KERNELS = ("linear", "rbf")
GAMMA_MODES = ("scale", "auto")


def _linear_kernel(A, B):
    return A @ B.T


def _rbf_kernel(A, B, gamma):
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@njit(cache=True)
def _take_step(i, j, K, y, alpha, u, b, C, eps):
    """Optimize the (i, j) pair. Returns the new threshold, or nan if no step."""
    if i == j:
        return np.nan
    ai, aj = alpha[i], alpha[j]
    yi, yj = y[i], y[j]
    Ei = u[i] + b - yi
    Ej = u[j] + b - yj
    s = yi * yj
    if s > 0:
        lo = max(0.0, ai + aj - C)
        hi = min(C, ai + aj)
    else:
        lo = max(0.0, aj - ai)
        hi = min(C, C + aj - ai)
    if hi - lo < eps:
        return np.nan
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    if eta <= 1e-12:
        return np.nan
    aj_new = aj + yj * (Ei - Ej) / eta
    if aj_new < lo:
        aj_new = lo
    elif aj_new > hi:
        aj_new = hi
    if abs(aj_new - aj) < eps * (aj + aj_new + eps):
        return np.nan
    ai_new = ai + s * (aj - aj_new)
    alpha[i] = ai_new
    alpha[j] = aj_new
    di = yi * (ai_new - ai)
    dj = yj * (aj_new - aj)
    for r in range(u.shape[0]):
        u[r] += di * K[i, r] + dj * K[j, r]
    b1 = b - Ei - di * K[i, i] - dj * K[i, j]
    b2 = b - Ej - di * K[i, j] - dj * K[j, j]
    if 0.0 < ai_new < C:
        return b1
    if 0.0 < aj_new < C:
        return b2
    return 0.5 * (b1 + b2)


@njit(cache=True)
def _smo(K, y, C, tol, max_passes):
    """Returns (alpha, bias, converged); ``u`` caches sum_j a_j y_j K_ij."""
    n = K.shape[0]
    alpha = np.zeros(n)
    u = np.zeros(n)
    b = 0.0
    eps = 1e-12
    examine_all = True
    converged = False
    for _ in range(max_passes):
        n_changed = 0
        for i in range(n):
            if not examine_all and (alpha[i] <= 0.0 or alpha[i] >= C):
                continue
            Ei = u[i] + b - y[i]
            r = Ei * y[i]
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0.0)):
                continue
            # second choice: largest |Ei - Ej| over non-bound, ties to low j
            best_j = -1
            best_gap = -1.0
            for t in range(n):
                if 0.0 < alpha[t] < C:
                    gap = abs(Ei - (u[t] + b - y[t]))
                    if gap > best_gap:
                        best_gap = gap
                        best_j = t
            stepped = False
            if best_j >= 0:
                nb = _take_step(i, best_j, K, y, alpha, u, b, C, eps)
                if not np.isnan(nb):
                    b = nb
                    stepped = True
            if not stepped:
                for t in range(n):
                    if 0.0 < alpha[t] < C:
                        nb = _take_step(i, t, K, y, alpha, u, b, C, eps)
                        if not np.isnan(nb):
                            b = nb
                            stepped = True
                            break
            if not stepped:
                for t in range(n):
                    nb = _take_step(i, t, K, y, alpha, u, b, C, eps)
                    if not np.isnan(nb):
                        b = nb
                        stepped = True
                        break
            if stepped:
                n_changed += 1
        if examine_all:
            if n_changed == 0:
                converged = True
                break
            examine_all = False
        elif n_changed == 0:
            examine_all = True
    # recompute the threshold from the converged duals: free support vectors
    # pin it exactly; otherwise take the midpoint of the feasible interval
    b_free = 0.0
    n_free = 0
    b_lo = -1.0e300
    b_hi = 1.0e300
    for t in range(n):
        gap = y[t] - u[t]
        if 0.0 < alpha[t] < C:
            b_free += gap
            n_free += 1
        elif (y[t] > 0 and alpha[t] <= 0.0) or (y[t] < 0 and alpha[t] >= C):
            # y_t * f(x_t) >= 1 here, so b >= y_t - u_t
            if gap > b_lo:
                b_lo = gap
        else:
            # y_t * f(x_t) <= 1 here, so b <= y_t - u_t
            if gap < b_hi:
                b_hi = gap
    if n_free > 0:
        bias = b_free / n_free
    elif b_lo > -1.0e299 and b_hi < 1.0e299:
        bias = 0.5 * (b_lo + b_hi)
    else:
        bias = b
    return alpha, bias, converged


class SVMClassifier(BaseEstimator, ClassifierMixin):
    """Binary SVM with linear or RBF kernel.

    ``gamma`` may be a float or one of the symbolic settings resolved at fit
    time on the (standardized) training matrix: ``'scale'`` is
    1 / (n_features * total variance of X), ``'auto'`` is 1 / n_features.
    The decision value is the signed margin; KKT conditions are enforced to
    ``tol``.
    """

    def __init__(self, C=1.0, kernel="linear", gamma="scale", tol=1e-3, max_passes=2000, standardize=True):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.standardize = standardize

    def _resolve_gamma(self, X):
        if isinstance(self.gamma, str):
            if self.gamma == "scale":
                var = float(X.var())
                return 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]
            if self.gamma == "auto":
                return 1.0 / X.shape[1]
            raise ValueError(f"gamma must be a float or one of {GAMMA_MODES}, got {self.gamma!r}")
        return float(self.gamma)

    def _kernel_matrix(self, A, B):
        if self.kernel == "linear":
            return _linear_kernel(A, B)
        return _rbf_kernel(A, B, self.gamma_)

    def fit(self, X, y):
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        X, y = check_X_y(X, y, dtype=float)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"training data must contain exactly 2 classes, got {classes.size}")
        self.classes_ = classes
        ypm = np.where(y == classes[1], 1.0, -1.0)
        if self.standardize:
            self.scaler_mean_, self.scaler_std_ = standardize_fit(X)
            Xs = standardize_apply(X, self.scaler_mean_, self.scaler_std_)
        else:
            self.scaler_mean_ = self.scaler_std_ = None
            Xs = X
        self.gamma_ = self._resolve_gamma(Xs) if self.kernel == "rbf" else None
        K = self._kernel_matrix(Xs, Xs)
        if not np.all(np.isfinite(K)):
            raise ValueError("kernel matrix contains non-finite values")
        alpha, bias, converged = _smo(K, ypm, float(self.C), float(self.tol), int(self.max_passes))
        self.alphas_ = alpha
        self.intercept_ = float(bias)
        self.converged_ = bool(converged)
        sv = alpha > 1e-10
        self.support_ = np.flatnonzero(sv)
        self.dual_coef_ = alpha[sv] * ypm[sv]
        self.support_vectors_ = Xs[sv]
        self.train_y_ = ypm
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "alphas_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was trained with {self.n_features_in_}")
        if self.scaler_mean_ is not None:
            X = standardize_apply(X, self.scaler_mean_, self.scaler_std_)
        if self.support_vectors_.shape[0] == 0:
            return np.full(X.shape[0], self.intercept_)
        K = self._kernel_matrix(X, self.support_vectors_)
        return K @ self.dual_coef_ + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores > 0, self.classes_[1], self.classes_[0])
