"""Small input-validation helpers shared across the package."""
from __future__ import annotations

import numpy as np


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Coerce a seed (or None) into a numpy Generator; pass Generators through."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def check_features(X, *, dim: int | None = None, name: str = "features") -> np.ndarray:
    """Return ``X`` as a finite 2-d float64 array, raising on anything else."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={X.ndim}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {dim}")
    return X


def check_labels(y, n_samples: int, n_classes: int | None = None) -> np.ndarray:
    """Return ``y`` as a 1-d int64 array of class indices, validated against bounds."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-d, got ndim={y.ndim}")
    if y.shape[0] != n_samples:
        raise ValueError(f"labels have length {y.shape[0]}, expected {n_samples}")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.rint(np.asarray(y, dtype=np.float64))
        if not np.allclose(rounded, y):
            raise ValueError("labels must be integers")
        y = rounded
    y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    if n_classes is not None and y.size and y.max() >= n_classes:
        raise ValueError(f"label {y.max()} out of range for {n_classes} classes")
    return y


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not value > 0.0 or not np.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
