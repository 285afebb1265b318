"""Input validation helpers for the estimator-facing API."""

import numpy as np


def check_windows(X, window_length=None, dtype=np.float32):
    """Validate and coerce a window matrix to shape (n_windows, length, 1).

    Accepts (n, L) or (n, L, 1) arrays of finite reals.
    """
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[2] != 1:
        raise ValueError(
            f"expected windows of shape (n, length) or (n, length, 1), got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty window set")
    if window_length is not None and X.shape[1] != window_length:
        raise ValueError(
            f"windows have length {X.shape[1]}, expected {window_length}")
    X = X.astype(dtype, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError("windows contain non-finite values")
    return X


def check_bits(y, n_expected=None):
    """Validate a target bit vector: 1-D, values in {0, 1}."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"expected a 1-D bit vector, got shape {y.shape}")
    if n_expected is not None and len(y) != n_expected:
        raise ValueError(f"got {len(y)} targets for {n_expected} windows")
    vals = np.unique(y)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError("targets must be binary (0 or 1)")
    return y.astype(np.int8, copy=False)


def check_probability(name, value, allow_one=False):
    hi_ok = value <= 1.0 if allow_one else value < 1.0
    if not (0.0 <= value and hi_ok):
        bound = "[0, 1]" if allow_one else "[0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return float(value)
