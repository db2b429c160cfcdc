"""Input validation helpers."""
from __future__ import annotations

import numpy as np


def check_dataset(X, name: str = "X") -> np.ndarray:
    """Coerce to a float array of shape ``(M, T, L, n)``.

    A 3-D array is read as ``(M, T, n)`` with a single agent.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        X = X[:, :, None, :]
    if X.ndim != 4:
        raise ValueError(f"{name} must have shape (M, T, L, n), got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_probability(value: float, name: str, open_interval: bool = True) -> float:
    value = float(value)
    ok = 0 < value < 1 if open_interval else 0 <= value <= 1
    if not ok:
        raise ValueError(f"{name} must lie in {'(0, 1)' if open_interval else '[0, 1]'}, got {value}")
    return value


def check_time(value, name: str) -> int:
    if int(value) != value or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value}")
    return int(value)
