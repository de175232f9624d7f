"""Small input-validation helpers used by the estimator classes."""
from __future__ import annotations

import numpy as np


def as_1d_float(x, name: str = "array") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_2d_float(x, name: str = "X") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


def require_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_length(n: int, **named) -> None:
    for name, arr in named.items():
        if arr is not None and len(arr) != n:
            raise ValueError(f"{name} has length {len(arr)}, expected {n}")
