"""Input validation helpers.

All public entry points funnel array arguments through these checks so the
numerical code can assume finite float64 arrays in the unit cube.
"""

from __future__ import annotations

import numpy as np


def as_float_array(a, name: str = "array") -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


def check_unit_cube(X, *, dim: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a 2-D array of points with every coordinate in [0, 1].

    Empty point sets (shape ``(0, dim)``) are legal; ``dim`` is then required
    to pin down the dimensionality.
    """
    X = as_float_array(X, name)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} must have {dim} columns, got {X.shape[1]}")
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError(f"{name} has coordinates outside [0, 1]")
    return X


def check_outcomes(y, n: int, name: str = "y") -> np.ndarray:
    y = as_float_array(y, name)
    y = y.reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {y.shape[0]}")
    return y


def check_batch(points, *, dim: int | None = None) -> np.ndarray:
    """Validate a candidate batch: a nonempty q x D matrix in the unit cube."""
    pts = check_unit_cube(points, dim=dim, name="batch")
    if pts.shape[0] < 1:
        raise ValueError("batch must contain at least one point")
    return pts


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value
