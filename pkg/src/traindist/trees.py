"""CART trees whose node regions double as a piecewise density model.

A tree grown here is a standard Gini-impurity CART, but every node keeps the
axis-parallel box it occupies, the indices of the training rows it covers,
and its class histogram.  That extra bookkeeping turns the fitted tree into a
boundary-location oracle: narrow boxes sit on class boundaries, so a
probability mass function that weights each box by the inverse of its
diagonal length concentrates on the boundary structure the tree discovered.

Sampling granularity is controlled by *depth schemes*: the scheme at level l
is the set of nodes obtained by cutting the tree at depth l (leaves above the
cut are kept, internal nodes at the cut stand in for their subtrees).  Every
scheme tiles the root box exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .validation import as_rng, check_features, check_labels

#: Width floor applied to degenerate box intervals before diagonal lengths.
DIAGONAL_FLOOR = 1e-12

#: Minimum Gini-impurity decrease for a split to be worth keeping.
GAIN_EPS = 1e-12


@dataclass(frozen=True)
class Box:
    """Axis-parallel box given by per-dimension closed intervals."""

    los: np.ndarray
    his: np.ndarray

    def __post_init__(self):
        los = np.asarray(self.los, dtype=np.float64)
        his = np.asarray(self.his, dtype=np.float64)
        if los.ndim != 1 or los.shape != his.shape:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(los > his):
            raise ValueError("box has lo > hi in some dimension")
        los.setflags(write=False)
        his.setflags(write=False)
        object.__setattr__(self, "los", los)
        object.__setattr__(self, "his", his)

    @property
    def dim(self) -> int:
        return self.los.shape[0]

    def widths(self, floor: float = 0.0) -> np.ndarray:
        return np.maximum(self.his - self.los, floor)

    def diagonal(self, floor: float = DIAGONAL_FLOOR) -> float:
        w = self.widths(floor)
        return float(np.sqrt(np.sum(w * w)))

    def volume(self) -> float:
        return float(np.prod(self.his - self.los))

    def split(self, feature: int, threshold: float) -> tuple["Box", "Box"]:
        """Partition along one dimension; left side keeps values <= threshold."""
        if not self.los[feature] <= threshold <= self.his[feature]:
            raise ValueError("split threshold outside the box")
        left_his = self.his.copy()
        left_his[feature] = threshold
        right_los = self.los.copy()
        right_los[feature] = threshold
        return Box(self.los.copy(), left_his), Box(right_los, self.his.copy())

    def contains(self, X: np.ndarray, atol: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.los - atol) & (X <= self.his + atol), axis=1)


@dataclass
class TreeNode:
    depth: int
    region: Box
    member_indices: np.ndarray
    label_histogram: np.ndarray
    split: tuple[int, float] | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def n_members(self) -> int:
        return int(self.member_indices.shape[0])


@dataclass(frozen=True)
class NodePmf:
    """Probability mass function over a list of tree nodes."""

    nodes: tuple[TreeNode, ...]
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.shape != (len(self.nodes),):
            raise ValueError("probability vector length must match node count")
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
            raise ValueError("probabilities must be non-negative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __len__(self) -> int:
        return len(self.nodes)

    def sample(self, rng: np.random.Generator | int | None = None) -> TreeNode:
        rng = as_rng(rng)
        cum = np.cumsum(self.probabilities)
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return self.nodes[min(i, len(self.nodes) - 1)]


@dataclass(frozen=True)
class _LevelScheme:
    """Array view of one depth scheme, cached for fast batched sampling."""

    nodes: tuple[TreeNode, ...]
    base_probs: np.ndarray
    entropies: np.ndarray
    majorities: np.ndarray
    box_los: np.ndarray
    box_his: np.ndarray
    member_offsets: np.ndarray
    member_pool: np.ndarray


def _gini_from_counts(counts: np.ndarray, total: int) -> float:
    return float(1.0 - np.sum((counts / total) ** 2))


def _best_split(X, y, n_classes, members, min_leaf):
    """Exhaustive (feature, midpoint-threshold) search maximizing Gini decrease.

    Returns (feature, threshold, gain) or None.  Ties break toward the lowest
    feature index and then the lowest threshold.
    """
    n = members.shape[0]
    if n < 2 * min_leaf:
        return None
    labels = y[members]
    parent_counts = np.bincount(labels, minlength=n_classes)
    parent_gini = _gini_from_counts(parent_counts, n)
    best = None
    best_gain = GAIN_EPS
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), labels] = 1
    for j in range(X.shape[1]):
        vals = X[members, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        boundaries = np.nonzero(sv[:-1] < sv[1:])[0]
        if boundaries.size == 0:
            continue
        thresholds = (sv[boundaries] + sv[boundaries + 1]) / 2.0
        # A midpoint that rounds up onto the next value cannot separate the
        # two runs, so drop it.
        valid = thresholds < sv[boundaries + 1]
        if min_leaf > 1:
            n_left = boundaries + 1
            valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not np.any(valid):
            continue
        cum = np.cumsum(onehot[order], axis=0)
        left_counts = cum[boundaries[valid]]
        thresholds = thresholds[valid]
        n_left = (boundaries[valid] + 1).astype(np.float64)
        n_right = n - n_left
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        right_counts = parent_counts[None, :] - left_counts
        gini_right = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        gains = parent_gini - ((n_left / n) * gini_left + (n_right / n) * gini_right)
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            best = (j, float(thresholds[k]), best_gain)
    return best


class DensityTree:
    """A fitted CART tree with region, membership, and histogram bookkeeping.

    Instances are immutable after construction apart from internal caches.
    Build them with :func:`fit_cart` or :meth:`from_json`.
    """

    def __init__(self, root: TreeNode, features: np.ndarray, labels: np.ndarray, n_classes: int):
        self.root = root
        self.features = features
        self.labels = labels
        self.n_classes = int(n_classes)
        self.max_depth_reached = max(node.depth for node in self.iter_nodes())
        self._level_cache: dict[int, _LevelScheme] = {}

    # ------------------------------------------------------------------
    # structure
    # ------------------------------------------------------------------
    def iter_nodes(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.iter_nodes() if n.is_leaf]

    def scheme_at_depth(self, level: int) -> list[TreeNode]:
        """Nodes obtained by cutting the tree at ``level``.

        The scheme keeps every leaf of depth <= level and every internal node
        sitting exactly at the cut; together they tile the root box.
        """
        level = int(level)
        if not 0 <= level <= self.max_depth_reached:
            raise ValueError(
                f"level {level} outside [0, {self.max_depth_reached}]"
            )
        out: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf and node.depth <= level:
                out.append(node)
            elif not node.is_leaf and node.depth == level:
                out.append(node)
            elif not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)
        return out[::-1]

    def depth_index(self, r: float) -> int:
        """Map a unit-interval draw onto an integer cut level.

        Level 0 is the root; r = 1 reaches the deepest level of this tree.
        """
        r = float(r)
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"depth draw {r} outside [0, 1]")
        d = self.max_depth_reached
        return min(int(np.floor(r * d)), d)

    # ------------------------------------------------------------------
    # prediction
    # ------------------------------------------------------------------
    def apply(self, X: np.ndarray) -> list[TreeNode]:
        X = check_features(X, dim=self.features.shape[1])
        out = []
        for row in X:
            node = self.root
            while not node.is_leaf:
                j, t = node.split
                node = node.left if row[j] <= t else node.right
            out.append(node)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([majority_label(n) for n in self.apply(X)], dtype=np.int64)

    # ------------------------------------------------------------------
    # cached scheme arrays for batched sampling
    # ------------------------------------------------------------------
    def level_scheme(self, level: int) -> _LevelScheme:
        if level not in self._level_cache:
            nodes = tuple(self.scheme_at_depth(level))
            pmf = base_pmf(nodes)
            self._level_cache[level] = _LevelScheme(
                nodes=nodes,
                base_probs=pmf.probabilities,
                entropies=np.array([node_entropy(n) for n in nodes]),
                majorities=np.array([majority_label(n) for n in nodes], dtype=np.int64),
                box_los=np.stack([n.region.los for n in nodes]),
                box_his=np.stack([n.region.his for n in nodes]),
                member_offsets=np.concatenate(
                    [[0], np.cumsum([n.n_members for n in nodes])]
                ).astype(np.int64),
                member_pool=np.concatenate([n.member_indices for n in nodes]).astype(np.int64),
            )
        return self._level_cache[level]

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json(self) -> str:
        def encode(node: TreeNode):
            doc = {
                "depth": node.depth,
                "split": None if node.is_leaf else [node.split[0], node.split[1]],
                "region": {"los": node.region.los.tolist(), "his": node.region.his.tolist()},
                "histogram": node.label_histogram.tolist(),
            }
            if not node.is_leaf:
                doc["left"] = encode(node.left)
                doc["right"] = encode(node.right)
            return doc

        return json.dumps(
            {"n_classes": self.n_classes, "root": encode(self.root)},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(
        cls,
        document: str,
        features: np.ndarray | None = None,
        labels: np.ndarray | None = None,
    ) -> "DensityTree":
        """Rebuild a tree from :meth:`to_json` output.

        When the original training arrays are supplied, rows are re-routed
        through the splits so member indices are available again; otherwise
        nodes carry empty member lists and only structural queries work.
        """
        doc = json.loads(document)
        n_classes = int(doc["n_classes"])

        def decode(d) -> TreeNode:
            region = Box(np.asarray(d["region"]["los"]), np.asarray(d["region"]["his"]))
            node = TreeNode(
                depth=int(d["depth"]),
                region=region,
                member_indices=np.empty(0, dtype=np.int64),
                label_histogram=np.asarray(d["histogram"], dtype=np.int64),
                split=None if d["split"] is None else (int(d["split"][0]), float(d["split"][1])),
            )
            if node.split is not None:
                node.left = decode(d["left"])
                node.right = decode(d["right"])
            return node

        root = decode(doc["root"])
        if features is None:
            features = np.zeros((0, root.region.dim))
            labels = np.zeros(0, dtype=np.int64)
        else:
            features = check_features(features)
            labels = check_labels(labels, features.shape[0], n_classes)
            _route_members(root, features, np.arange(features.shape[0], dtype=np.int64))
        return cls(root, features, labels, n_classes)


def _route_members(node: TreeNode, X: np.ndarray, indices: np.ndarray) -> None:
    node.member_indices = indices
    if node.is_leaf:
        return
    j, t = node.split
    mask = X[indices, j] <= t
    _route_members(node.left, X, indices[mask])
    _route_members(node.right, X, indices[~mask])


def fit_cart(
    X,
    y,
    n_classes: int | None = None,
    max_depth: int | None = None,
    min_leaf: int = 1,
    root_box: Box | None = None,
    rng: np.random.Generator | int | None = None,
) -> DensityTree:
    """Grow a CART tree with Gini-impurity splits at value midpoints.

    Splitting stops at pure nodes, the depth limit, nodes smaller than
    2 * min_leaf, or when no candidate decreases the impurity.  The default
    root box is the unit box, expanded where the data falls outside it.
    ``rng`` is accepted for interface symmetry; growth is deterministic.
    """
    X = check_features(X)
    if n_classes is None:
        n_classes = int(np.max(y)) + 1
    y = check_labels(y, X.shape[0], n_classes)
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be >= 1, got {min_leaf}")
    if max_depth is not None and max_depth < 0:
        raise ValueError(f"max_depth must be >= 0, got {max_depth}")
    if root_box is None:
        root_box = Box(np.minimum(0.0, X.min(axis=0)), np.maximum(1.0, X.max(axis=0)))
    elif root_box.dim != X.shape[1]:
        raise ValueError("root box dimension does not match the data")

    all_indices = np.arange(X.shape[0], dtype=np.int64)
    root = TreeNode(
        depth=0,
        region=root_box,
        member_indices=all_indices,
        label_histogram=np.bincount(y, minlength=n_classes),
    )
    stack = [root]
    while stack:
        node = stack.pop()
        hist = node.label_histogram
        pure = np.count_nonzero(hist) <= 1
        at_limit = max_depth is not None and node.depth >= max_depth
        if pure or at_limit:
            continue
        found = _best_split(X, y, n_classes, node.member_indices, min_leaf)
        if found is None:
            continue
        j, t, _ = found
        mask = X[node.member_indices, j] <= t
        left_idx = node.member_indices[mask]
        right_idx = node.member_indices[~mask]
        left_box, right_box = node.region.split(j, t)
        node.split = (j, t)
        node.left = TreeNode(
            depth=node.depth + 1,
            region=left_box,
            member_indices=left_idx,
            label_histogram=np.bincount(y[left_idx], minlength=n_classes),
        )
        node.right = TreeNode(
            depth=node.depth + 1,
            region=right_box,
            member_indices=right_idx,
            label_histogram=np.bincount(y[right_idx], minlength=n_classes),
        )
        stack.append(node.left)
        stack.append(node.right)
    return DensityTree(root, X, y, n_classes)


def base_pmf(nodes, diagonal_floor: float = DIAGONAL_FLOOR) -> NodePmf:
    """Pmf over nodes with mass proportional to inverse region diagonal.

    Narrow regions hug decision boundaries, so they receive the most mass.
    Degenerate intervals are floored at ``diagonal_floor`` before the
    diagonal length is computed.
    """
    nodes = tuple(nodes)
    if not nodes:
        raise ValueError("cannot build a pmf over zero nodes")
    diags = np.array([n.region.diagonal(diagonal_floor) for n in nodes])
    if np.any(diags <= 0.0):
        raise ValueError("node region has zero diagonal after the epsilon floor")
    weights = 1.0 / diags
    return NodePmf(nodes, weights / weights.sum())


def smooth_pmf(pmf: NodePmf, smoothing: float) -> NodePmf:
    """Additive smoothing that lifts every node by smoothing/m, renormalized.

    The map is monotone, so the probability ordering of nodes is preserved;
    large values flatten the pmf toward uniform.
    """
    if smoothing < 0:
        raise ValueError(f"smoothing must be >= 0, got {smoothing}")
    if smoothing == 0:
        return pmf
    lifted = pmf.probabilities + smoothing / len(pmf)
    return NodePmf(pmf.nodes, lifted / lifted.sum())


def node_entropy(node: TreeNode) -> float:
    """Shannon entropy of the node's class histogram, normalized to [0, 1]."""
    hist = np.asarray(node.label_histogram, dtype=np.float64)
    total = hist.sum()
    if total <= 0:
        raise ValueError("cannot compute entropy of an empty node")
    k = hist.shape[0]
    if k < 2:
        raise ValueError("histogram must cover at least two classes")
    p = hist[hist > 0] / total
    h = float(-(p * np.log2(p)).sum())
    return max(h / np.log2(k), 0.0)


def majority_label(node: TreeNode) -> int:
    """Most frequent class in the node; ties go to the smallest class index."""
    hist = np.asarray(node.label_histogram)
    if hist.sum() <= 0:
        raise ValueError("cannot take the majority label of an empty node")
    return int(np.argmax(hist))


def sample_uniform_in_region(
    box: Box, rng: np.random.Generator | int | None = None
) -> np.ndarray:
    """One point uniform in the box; degenerate dimensions return the bound."""
    rng = as_rng(rng)
    u = rng.random(box.dim)
    return box.los + u * (box.his - box.los)
