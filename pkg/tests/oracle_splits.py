"""Brute-force reference for the tree split search, used by several tests.

Mirrors the production arithmetic term for term (same dtype, same
expression shapes) so agreement is exact, not approximate: iterate
features in ascending order, thresholds in ascending order, keep a
candidate only when its gain is strictly greater than the incumbent.
"""

import numpy as np

GAIN_EPS = 1e-12


def gini(counts, total):
    counts = np.asarray(counts, dtype=np.float64)
    return float(1.0 - np.sum((counts / total) ** 2))


def exhaustive_best_split(X, y, n_classes, members, min_leaf=1):
    members = np.asarray(members, dtype=np.int64)
    n = members.shape[0]
    if n < 2 * min_leaf:
        return None
    labels = y[members]
    parent_counts = np.bincount(labels, minlength=n_classes)
    parent_gini = gini(parent_counts, n)
    best = None
    best_gain = GAIN_EPS
    for j in range(X.shape[1]):
        vals = X[members, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sl = labels[order]
        for b in range(n - 1):
            if not sv[b] < sv[b + 1]:
                continue
            threshold = (sv[b] + sv[b + 1]) / 2.0
            if not threshold < sv[b + 1]:
                continue
            n_left = b + 1
            n_right = n - n_left
            if min_leaf > 1 and (n_left < min_leaf or n_right < min_leaf):
                continue
            left_counts = np.bincount(sl[:n_left], minlength=n_classes)
            nl = np.float64(n_left)
            nr = np.float64(n_right)
            gini_left = 1.0 - np.sum((left_counts / nl) ** 2)
            gini_right = 1.0 - np.sum(((parent_counts - left_counts) / nr) ** 2)
            gain = parent_gini - ((nl / n) * gini_left + (nr / n) * gini_right)
            if gain > best_gain:
                best_gain = float(gain)
                best = (j, float(threshold), best_gain)
    return best


def random_split_case(rng):
    """A small labelled dataset with duplicates and ties sprinkled in."""
    n = int(rng.integers(5, 40))
    dim = int(rng.integers(1, 5))
    k = int(rng.integers(2, 4))
    if rng.random() < 0.5:
        X = rng.random((n, dim))
    else:
        X = rng.integers(0, 4, size=(n, dim)).astype(np.float64) / 4.0
    y = rng.integers(0, k, size=n).astype(np.int64)
    min_leaf = int(rng.integers(1, 4))
    return X, y, k, min_leaf
