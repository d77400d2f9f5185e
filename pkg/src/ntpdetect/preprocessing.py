"""Feature standardization fitted on the training split and replayed at
scoring time. Zero-variance columns are mapped to exactly zero rather than
dividing by zero."""

from __future__ import annotations

import numpy as np


def standardize_fit(X) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population std of a non-empty matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("standardize_fit needs a non-empty 2-d matrix")
    return X.mean(axis=0), X.std(axis=0)


def standardize_apply(X, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Apply stored statistics; columns with zero training variance become 0."""
    X = np.asarray(X, dtype=float)
    safe = np.where(std == 0.0, 1.0, std)
    out = (X - mean) / safe
    out[:, std == 0.0] = 0.0
    return out
