"""Input validation helpers shared across the package."""

import numpy as np


def check_matrix(X, name="X", dtype=float):
    """Coerce ``X`` to a finite 2-D float array."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if X.size and not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


def check_vector(y, name="y", length=None):
    """Coerce ``y`` to a finite 1-D float array, optionally of fixed length."""
    y = np.asarray(y, dtype=float).ravel()
    if length is not None and y.shape[0] != length:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {length}")
    if y.size and not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN or Inf")
    return y


def check_simplex(w, n=None, atol=1e-8):
    """Validate that ``w`` is a probability vector."""
    w = np.asarray(w, dtype=float).ravel()
    if n is not None and w.shape[0] != n:
        raise ValueError(f"weight vector has length {w.shape[0]}, expected {n}")
    if np.any(w < -atol) or abs(w.sum() - 1.0) > max(atol, 1e-12 * w.shape[0]):
        raise ValueError("weights must be nonnegative and sum to 1")
    return np.clip(w, 0.0, None) / max(w.sum(), np.finfo(float).tiny)


def check_positive(value, name, strict=True):
    value = float(value)
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value
