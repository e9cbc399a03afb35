"""Bags of density trees over randomly sheared copies of the training data.

Axis-parallel trees can only see axis-parallel structure.  Fitting several
trees, each on the data pushed through a random near-identity linear map,
and then pulling samples back through the inverse map, lets the ensemble
cover boundaries at arbitrary orientations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .trees import Box, DensityTree, fit_cart
from .validation import as_rng, check_probability

#: How close A @ A^-1 must be to the identity for a transform to be accepted.
INVERSE_TOL = 1e-8


@dataclass(frozen=True)
class Transform:
    """An invertible linear map with unit diagonal and its precomputed inverse."""

    matrix: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=np.float64)
        B = np.asarray(self.inverse, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise ValueError("transform matrices must be square and congruent")
        resid = np.abs(A @ B - np.eye(A.shape[0])).max()
        if resid >= INVERSE_TOL:
            raise ValueError(f"inverse check failed, max residual {resid:g}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "inverse", B)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Row i of the result is matrix @ X[i]."""
        return np.asarray(X) @ self.matrix.T

    def invert(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) @ self.inverse.T


def near_identity_matrix(
    dim: int,
    epsilon: float,
    rng: np.random.Generator | int | None = None,
    max_tries: int = 5,
) -> Transform:
    """Identity plus uniform [0, epsilon) off-diagonal entries, with inverse.

    The inverse comes from LU factorization with partial pivoting.  A draw
    whose inverse fails the residual check is retried; with unit diagonal and
    small epsilon that is essentially never needed.  epsilon = 0 returns the
    exact identity, which keeps regions axis-aligned in the original space.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon == 0:
        eye = np.eye(dim)
        return Transform(eye, eye.copy())
    rng = as_rng(rng)
    last_err: Exception | None = None
    for _ in range(max_tries):
        A = rng.uniform(0.0, epsilon, (dim, dim))
        np.fill_diagonal(A, 1.0)
        try:
            return Transform(A, np.linalg.inv(A))
        except (np.linalg.LinAlgError, ValueError) as err:
            last_err = err
    raise ValueError(f"could not draw an invertible transform: {last_err}")


@dataclass(frozen=True)
class Bag:
    """Density trees paired one-to-one with the transforms they were fit under."""

    trees: tuple[DensityTree, ...]
    transforms: tuple[Transform, ...]

    def __post_init__(self):
        if not self.trees or len(self.trees) != len(self.transforms):
            raise ValueError("bag needs equally many trees and transforms, at least one")
        dims = {t.dim for t in self.transforms}
        if len(dims) != 1:
            raise ValueError("all transforms must share one dimension")

    @property
    def size(self) -> int:
        return len(self.trees)

    @property
    def dim(self) -> int:
        return self.transforms[0].dim

    @property
    def class_count(self) -> int:
        return self.trees[0].n_classes

    def to_json(self) -> str:
        docs = []
        for tree, tf in zip(self.trees, self.transforms):
            docs.append(
                {
                    "matrix": tf.matrix.tolist(),
                    "inverse": tf.inverse.tolist(),
                    "tree": json.loads(tree.to_json()),
                    "features": tree.features.tolist(),
                    "labels": tree.labels.tolist(),
                }
            )
        return json.dumps({"members": docs}, separators=(",", ":"))

    @classmethod
    def from_json(cls, document: str) -> "Bag":
        doc = json.loads(document)
        trees = []
        transforms = []
        for member in doc["members"]:
            transforms.append(
                Transform(np.asarray(member["matrix"]), np.asarray(member["inverse"]))
            )
            trees.append(
                DensityTree.from_json(
                    json.dumps(member["tree"]),
                    features=np.asarray(member["features"], dtype=np.float64),
                    labels=np.asarray(member["labels"], dtype=np.int64),
                )
            )
        return cls(tuple(trees), tuple(transforms))


def build_bag(
    train: Dataset,
    size: int = 5,
    epsilon: float = 0.2,
    rng: np.random.Generator | int | None = None,
    min_leaf: int = 1,
) -> Bag:
    """Fit ``size`` unrestricted density trees on sheared copies of ``train``.

    Each tree sees the data mapped through its own near-identity transform
    and is grown over the bounding box of the mapped points.
    """
    if size < 1:
        raise ValueError(f"bag size must be >= 1, got {size}")
    rng = as_rng(rng)
    trees: list[DensityTree] = []
    transforms: list[Transform] = []
    for _ in range(size):
        tf = near_identity_matrix(train.dim, epsilon, rng)
        mapped = tf.apply(train.features)
        box = Box(mapped.min(axis=0), mapped.max(axis=0))
        tree = fit_cart(
            mapped,
            train.labels,
            n_classes=train.class_count,
            min_leaf=min_leaf,
            root_box=box,
        )
        trees.append(tree)
        transforms.append(tf)
    return Bag(tuple(trees), tuple(transforms))


def sample_from_bag(
    n: int,
    bag: Bag,
    depth_sampler,
    smoothing: float,
    entropy_threshold: float,
    rng: np.random.Generator | int | None = None,
) -> Dataset:
    """Draw ``n`` labeled points from the bag's boundary-weighted distribution.

    Per point: draw a depth value, pick a (tree, transform) pair uniformly,
    pick a node from the smoothed inverse-diagonal pmf over that tree's
    scheme at the drawn depth, then either emit a synthetic point uniform in
    the node's region with the node's majority label (node entropy at or
    below the threshold) or fall back to an actual covered training pair.
    Every emitted point is pulled back through the transform's inverse; the
    result may fall outside the unit box and is intentionally not clamped.

    ``depth_sampler(n, rng)`` must return ``n`` values in [0, 1].  All
    per-point choices are drawn independently; grouping below is only a
    batching strategy and does not change the sampling distribution.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if smoothing < 0:
        raise ValueError(f"smoothing must be >= 0, got {smoothing}")
    entropy_threshold = check_probability(entropy_threshold, "entropy_threshold")
    rng = as_rng(rng)

    r = np.asarray(depth_sampler(n, rng), dtype=np.float64)
    if r.shape != (n,):
        raise ValueError("depth_sampler returned the wrong number of values")
    if np.any((r < 0) | (r > 1)):
        raise ValueError("depth draws must lie in [0, 1]")
    tree_pick = rng.integers(0, bag.size, n)
    u_node = rng.random(n)

    levels = np.empty(n, dtype=np.int64)
    for t_i, tree in enumerate(bag.trees):
        mask = tree_pick == t_i
        if not np.any(mask):
            continue
        d = tree.max_depth_reached
        levels[mask] = np.minimum(np.floor(r[mask] * d).astype(np.int64), d)

    X_out = np.empty((n, bag.dim), dtype=np.float64)
    y_out = np.empty(n, dtype=np.int64)
    # Process points grouped by (tree, level) so pmfs are built once per group.
    group_key = tree_pick * (max(t.max_depth_reached for t in bag.trees) + 1) + levels
    order = np.argsort(group_key, kind="stable")
    boundaries = np.flatnonzero(np.diff(group_key[order])) + 1
    for chunk in np.split(order, boundaries):
        t_i = int(tree_pick[chunk[0]])
        level = int(levels[chunk[0]])
        tree = bag.trees[t_i]
        scheme = tree.level_scheme(level)
        probs = scheme.base_probs
        if smoothing > 0:
            lifted = probs + smoothing / probs.shape[0]
            probs = lifted / lifted.sum()
        cum = np.cumsum(probs)
        local = np.searchsorted(cum, u_node[chunk] * cum[-1], side="right")
        local = np.minimum(local, probs.shape[0] - 1)

        synthetic = scheme.entropies[local] <= entropy_threshold
        X_mapped = np.empty((chunk.shape[0], bag.dim), dtype=np.float64)
        y_grp = np.empty(chunk.shape[0], dtype=np.int64)
        if np.any(synthetic):
            pick = local[synthetic]
            los = scheme.box_los[pick]
            his = scheme.box_his[pick]
            X_mapped[synthetic] = los + rng.random(los.shape) * (his - los)
            y_grp[synthetic] = scheme.majorities[pick]
        fallback = ~synthetic
        if np.any(fallback):
            pick = local[fallback]
            starts = scheme.member_offsets[pick]
            lengths = scheme.member_offsets[pick + 1] - starts
            offsets = np.floor(rng.random(pick.shape[0]) * lengths).astype(np.int64)
            rows = scheme.member_pool[starts + np.minimum(offsets, lengths - 1)]
            X_mapped[fallback] = tree.features[rows]
            y_grp[fallback] = tree.labels[rows]
        X_out[chunk] = bag.transforms[t_i].invert(X_mapped)
        y_out[chunk] = y_grp
    return Dataset(X_out, y_out, class_count=bag.class_count)
