"""Size-constrained classifier families and the macro-F1 metrics they report.

Each family exposes one integer size knob: tree depth for the CART
classifier, number of selected features per binary model for the linear
probability machine, and boosting rounds for the gradient-boosted ensemble.
All three follow the scikit-learn estimator protocol so they can be cloned
and swapped interchangeably by the search loop.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from .trees import fit_cart

#: Ridge jitter applied to least-squares normal matrices.
RIDGE_JITTER = 1e-8

#: Floor applied to summed hessians in boosting leaf values.
HESSIAN_FLOOR = 1e-6


# ----------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------
def macro_f1(y_true, y_pred, n_classes: int | None = None) -> float:
    """Unweighted mean of per-class F1 scores.

    A class's precision or recall of 0/0 counts as 0, so classes absent from
    both vectors contribute an F1 of 0.  ``n_classes`` fixes the class set;
    by default it is inferred from the largest index present.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be 1-d arrays of equal length")
    if y_true.size == 0:
        raise ValueError("cannot score empty label vectors")
    k = int(n_classes) if n_classes is not None else int(max(y_true.max(), y_pred.max())) + 1
    if y_true.max() >= k or y_pred.max() >= k or y_true.min() < 0 or y_pred.min() < 0:
        raise ValueError(f"labels out of range for {k} classes")
    confusion = np.bincount(y_true * k + y_pred, minlength=k * k).reshape(k, k)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    precision = np.divide(tp, tp + fp, out=np.zeros(k), where=(tp + fp) > 0)
    recall = np.divide(tp, tp + fn, out=np.zeros(k), where=(tp + fn) > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(k), where=pr > 0)
    return float(f1.mean())


def evaluate_macro_f1(model, dataset) -> float:
    """Macro-F1 of a fitted model on a Dataset, over the dataset's class set."""
    pred = model.predict(dataset.features)
    return macro_f1(dataset.labels, pred, n_classes=dataset.class_count)


def delta_f1(f1_new: float, f1_baseline: float) -> float:
    """Relative F1 improvement in percent; negative when the new model is worse."""
    if not f1_baseline > 0:
        raise ValueError(f"baseline F1 must be positive, got {f1_baseline}")
    return 100.0 * (f1_new - f1_baseline) / f1_baseline


def floored_delta_f1(f1_new: float, f1_baseline: float) -> float:
    """Reported improvement: relative delta clipped below at zero."""
    return max(0.0, delta_f1(f1_new, f1_baseline))


# ----------------------------------------------------------------------
# decision tree classifier
# ----------------------------------------------------------------------
class SizedTreeClassifier(ClassifierMixin, BaseEstimator):
    """CART classifier whose size knob is the maximum tree depth."""

    def __init__(self, max_depth: int = 1, min_leaf: int = 1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.tree_ = fit_cart(
            X,
            encoded,
            n_classes=len(self.classes_),
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
        )
        self.realized_depth_ = self.tree_.max_depth_reached
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X)
        if len(self.classes_) == 1:
            return np.full(X.shape[0], self.classes_[0])
        return self.classes_[self.tree_.predict(X)]


# ----------------------------------------------------------------------
# linear probability machine
# ----------------------------------------------------------------------
def _forward_select(X, target, n_terms):
    """Greedy forward stepwise least squares on one 0/1 target.

    Each step adds the inactive feature with the largest absolute Pearson
    correlation to the current residual, then refits the full least-squares
    solution on the active set (with an intercept and a ridge jitter).
    """
    n, d = X.shape
    col_mean = X.mean(axis=0)
    centered = X - col_mean
    col_norm = np.sqrt((centered**2).sum(axis=0))
    intercept = float(target.mean())
    residual = target - intercept
    active: list[int] = []
    weights = np.zeros(0)
    for _ in range(n_terms):
        rc = residual - residual.mean()
        r_norm = float(np.sqrt((rc**2).sum()))
        denom = col_norm * r_norm
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.abs(np.where(denom > 0, centered.T @ rc / np.where(denom > 0, denom, 1.0), 0.0))
        corr[active] = -np.inf
        active.append(int(np.argmax(corr)))
        design = np.column_stack([np.ones(n), X[:, active]])
        gram = design.T @ design + RIDGE_JITTER * np.eye(design.shape[1])
        solution = np.linalg.solve(gram, design.T @ target)
        intercept = float(solution[0])
        weights = solution[1:]
        residual = target - design @ solution
    return active, weights, intercept


class SizedLinearClassifier(ClassifierMixin, BaseEstimator):
    """One-vs-rest linear probability machine sized by terms per binary model."""

    def __init__(self, n_terms: int = 1):
        self.n_terms = n_terms

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_terms < 1:
            raise ValueError(f"n_terms must be >= 1, got {self.n_terms}")
        if self.n_terms > X.shape[1]:
            raise ValueError(
                f"n_terms={self.n_terms} exceeds the {X.shape[1]} available features"
            )
        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.active_sets_ = []
        self.coef_ = np.zeros((len(self.classes_), X.shape[1]))
        self.intercept_ = np.zeros(len(self.classes_))
        for c in range(len(self.classes_)):
            target = (encoded == c).astype(np.float64)
            active, weights, intercept = _forward_select(X, target, self.n_terms)
            self.active_sets_.append(tuple(active))
            self.coef_[c, active] = weights
            self.intercept_[c] = intercept
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        if len(self.classes_) == 1:
            return np.full(scores.shape[0], self.classes_[0])
        return self.classes_[np.argmax(scores, axis=1)]


# ----------------------------------------------------------------------
# gradient boosting
# ----------------------------------------------------------------------
class _RegressionStump:
    """Depth-limited least-squares regression tree with Newton leaf values."""

    def __init__(self, max_depth):
        self.max_depth = max_depth
        self.nodes: list[tuple] = []  # (feature, threshold, left, right) or (None, value)

    def fit(self, X, grad, hess):
        self.nodes = []
        self._grow(X, grad, hess, np.arange(X.shape[0]), 0)
        return self

    def _grow(self, X, grad, hess, members, depth) -> int:
        node_id = len(self.nodes)
        self.nodes.append(None)
        g = grad[members]
        best = None
        if depth < self.max_depth and members.shape[0] >= 2:
            total = g.sum()
            n = members.shape[0]
            base = total * total / n
            best_gain = 1e-12
            for j in range(X.shape[1]):
                vals = X[members, j]
                order = np.argsort(vals, kind="stable")
                sv = vals[order]
                cut = np.nonzero(sv[:-1] < sv[1:])[0]
                if cut.size == 0:
                    continue
                thresholds = (sv[cut] + sv[cut + 1]) / 2.0
                valid = thresholds < sv[cut + 1]
                if not np.any(valid):
                    continue
                csum = np.cumsum(g[order])
                left_sum = csum[cut[valid]]
                n_left = (cut[valid] + 1).astype(np.float64)
                n_right = n - n_left
                gains = left_sum**2 / n_left + (total - left_sum) ** 2 / n_right - base
                k = int(np.argmax(gains))
                if gains[k] > best_gain:
                    best_gain = float(gains[k])
                    best = (j, float(thresholds[valid][k]))
        if best is None:
            value = float(g.sum() / max(hess[members].sum(), HESSIAN_FLOOR))
            self.nodes[node_id] = (None, value)
            return node_id
        j, t = best
        mask = X[members, j] <= t
        left = self._grow(X, grad, hess, members[mask], depth + 1)
        right = self._grow(X, grad, hess, members[~mask], depth + 1)
        self.nodes[node_id] = (j, t, left, right)
        return node_id

    def predict(self, X):
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.nodes[0]
            while node[0] is not None:
                j, t, left, right = node
                node = self.nodes[left] if row[j] <= t else self.nodes[right]
            out[i] = node[1]
        return out


def _softmax(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class SizedBoostedClassifier(ClassifierMixin, BaseEstimator):
    """Softmax gradient boosting sized by the number of boosting rounds.

    Scores start at the class log priors; each round fits one regression
    tree per class to the one-hot-minus-probability residuals, with Newton
    steps in the leaves and shrinkage by the learning rate.  A learning rate
    of 0 therefore leaves the prior-only model untouched.
    """

    def __init__(self, n_rounds: int = 1, base_max_depth: int = 2, learning_rate: float = 0.1):
        self.n_rounds = n_rounds
        self.base_max_depth = base_max_depth
        self.learning_rate = learning_rate

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        k = len(self.classes_)
        priors = np.bincount(encoded, minlength=k) / len(encoded)
        self.init_scores_ = np.log(np.maximum(priors, 1e-12))
        self.rounds_: list[list[_RegressionStump]] = []
        if k == 1:
            self.n_features_in_ = X.shape[1]
            return self
        onehot = np.zeros((len(encoded), k))
        onehot[np.arange(len(encoded)), encoded] = 1.0
        scores = np.tile(self.init_scores_, (len(encoded), 1))
        for _ in range(self.n_rounds):
            probs = _softmax(scores)
            round_trees = []
            for c in range(k):
                grad = onehot[:, c] - probs[:, c]
                hess = probs[:, c] * (1.0 - probs[:, c])
                tree = _RegressionStump(self.base_max_depth).fit(X, grad, hess)
                round_trees.append(tree)
                scores[:, c] += self.learning_rate * tree.predict(X)
            self.rounds_.append(round_trees)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "init_scores_")
        X = check_array(X)
        scores = np.tile(self.init_scores_, (X.shape[0], 1))
        for round_trees in self.rounds_:
            for c, tree in enumerate(round_trees):
                scores[:, c] += self.learning_rate * tree.predict(X)
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        if len(self.classes_) == 1:
            return np.full(scores.shape[0], self.classes_[0])
        return self.classes_[np.argmax(scores, axis=1)]

    def training_log_loss(self, X, y) -> float:
        """Mean negative log-likelihood under the fitted scores."""
        X = check_array(X)
        y = np.asarray(y)
        encoded = np.searchsorted(self.classes_, y)
        probs = _softmax(self.decision_function(X))
        picked = np.maximum(probs[np.arange(len(y)), encoded], 1e-300)
        return float(-np.mean(np.log(picked)))
