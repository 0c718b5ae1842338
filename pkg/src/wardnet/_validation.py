"""Input validation helpers shared by the functional API and the estimator."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


class InvariantViolation(RuntimeError):
    """Raised when an internal consistency identity fails numerically."""


def as_float_matrix(a, name: str, *, ndim: int = 2) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_nonnegative_inputs(X) -> np.ndarray:
    """sklearn-style check for a 2-D array of nonnegative samples."""
    X = check_array(X, dtype=np.float64, ensure_min_features=1)
    if np.any(X < 0):
        raise ValueError("inputs must be nonnegative")
    return X


def column_sum_error(w: np.ndarray) -> float:
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(w.sum(axis=0) - 1.0)))


def check_column_stochastic(w, name: str = "matrix", tol: float = 1e-12) -> np.ndarray:
    w = as_float_matrix(w, name)
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries (min {w.min():.3g})")
    err = column_sum_error(w)
    if err > tol:
        raise ValueError(f"{name} is not column-stochastic: max column-sum error {err:.3g}")
    return w


def check_one_hot(Y) -> np.ndarray:
    Y = as_float_matrix(Y, "labels")
    ok = np.all((Y == 0) | (Y == 1), axis=1) & (Y.sum(axis=1) == 1)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise ValueError(f"label of sample {bad} is not one-hot")
    return Y


def freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def rel_close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * (1.0 + max(abs(a), abs(b)))
