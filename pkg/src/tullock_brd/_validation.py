"""Input checks shared by the functional API and the estimator wrappers."""

import math

import numpy as np


def check_profile(x, n=None, name="x") -> np.ndarray:
    """Return ``x`` as a fresh 1-D float array of finite, non-negative outputs."""
    arr = np.array(x, dtype=float, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    return arr


def check_vector(z, name="z") -> np.ndarray:
    """Return ``z`` as a fresh 1-D float array of finite reals (any sign)."""
    arr = np.array(z, dtype=float, copy=True)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_index(i, n) -> int:
    if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
        raise TypeError(f"agent index must be an integer, got {i!r}")
    if not 0 <= i < n:
        raise IndexError(f"agent index {i} out of range for n={n}")
    return int(i)


def check_finite_nonneg(value, name) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if v < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return v


def check_eps(eps, name="eps") -> float:
    e = float(eps)
    if not (0 < e < 1):
        raise ValueError(f"{name} must lie in (0, 1), got {eps!r}")
    return e
