"""Synthetic 2-d benchmark datasets used in tests and demos."""
from __future__ import annotations

import numpy as np

from .data import Dataset
from .validation import as_rng


def make_concentric(
    n: int,
    radii: tuple[float, ...] = (0.18, 0.38),
    rng: np.random.Generator | int | None = None,
    center: tuple[float, float] = (0.5, 0.5),
    noise: float = 0.0,
) -> Dataset:
    """Two-class rings around a shared center, features uniform on [0, 1]^2.

    Region boundaries are the circles with the given radii; the class
    alternates between consecutive regions starting with class 0 innermost.
    ``noise`` flips each label independently with that probability.
    """
    rng = as_rng(rng)
    radii = tuple(sorted(float(r) for r in radii))
    if not radii:
        raise ValueError("need at least one radius")
    X = rng.random((int(n), 2))
    r = np.hypot(X[:, 0] - center[0], X[:, 1] - center[1])
    region = np.searchsorted(np.asarray(radii), r, side="right")
    y = (region % 2).astype(np.int64)
    if noise > 0.0:
        flip = rng.random(len(y)) < noise
        y = np.where(flip, 1 - y, y)
    return Dataset(X, y, class_count=2)


def make_xor(n: int, rng: np.random.Generator | int | None = None) -> Dataset:
    """Uniform points on [0, 1]^2 labeled by the XOR of the half-plane tests."""
    rng = as_rng(rng)
    X = rng.random((int(n), 2))
    y = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5)).astype(np.int64)
    return Dataset(X, y, class_count=2)


def make_grid_blobs(
    n: int,
    n_classes: int = 4,
    spread: float = 0.08,
    rng: np.random.Generator | int | None = None,
) -> Dataset:
    """Gaussian blobs on a 2-d grid, clipped to the unit box; one blob per class."""
    rng = as_rng(rng)
    side = int(np.ceil(np.sqrt(n_classes)))
    centers = [
        ((i + 0.5) / side, (j + 0.5) / side)
        for i in range(side)
        for j in range(side)
    ][:n_classes]
    y = rng.integers(0, n_classes, int(n))
    mu = np.asarray(centers)[y]
    X = np.clip(mu + rng.normal(0.0, spread, (int(n), 2)), 0.0, 1.0)
    return Dataset(X, y.astype(np.int64), class_count=n_classes)
