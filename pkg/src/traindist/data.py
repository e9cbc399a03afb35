"""Dataset container, sparse text format, unit-box scaling, stratified splitting.

The pipeline works on dense float features with contiguous integer class
labels.  Raw label values seen in input files (for example -1/+1) are kept in
a side table so reports can refer back to them.
"""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .validation import as_rng, check_features, check_labels


class SparseFormatError(ValueError):
    """Raised when a sparse-format document cannot be parsed."""


@dataclass(frozen=True)
class Dataset:
    """Immutable (features, labels) pair with a declared class count.

    ``class_count`` is the number of classes of the originating dataset, not
    of this particular slice; subsets and synthetic resamples keep the parent
    count even when some class happens to be absent from them.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    raw_labels: tuple | None = None

    def __post_init__(self):
        X = check_features(self.features)
        y = check_labels(self.labels, X.shape[0], self.class_count)
        if self.class_count < 2:
            raise ValueError(f"class_count must be >= 2, got {self.class_count}")
        if self.raw_labels is not None and len(self.raw_labels) != self.class_count:
            raise ValueError("raw_labels length must equal class_count")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[indices].copy(),
            self.labels[indices].copy(),
            self.class_count,
            self.raw_labels,
        )

    def to_csv(self) -> str:
        """Dense CSV export with a header row (label column first)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["y"] + [f"f{j}" for j in range(self.dim)])
        for i in range(self.n_samples):
            writer.writerow([int(self.labels[i])] + [repr(float(v)) for v in self.features[i]])
        return buf.getvalue()


class Splits(NamedTuple):
    train: Dataset
    val: Dataset
    test: Dataset


def parse_sparse_dataset(text: str) -> Dataset:
    """Parse the sparse ``label idx:value ...`` text format into a Dataset.

    Indices are 1-based and must be strictly increasing within a line; the
    dimensionality is the largest index seen anywhere in the document.
    Distinct raw labels are remapped, in sorted order, to 0..k-1.
    """
    rows: list[tuple[float, list[int], list[float]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise SparseFormatError(f"line {lineno}: unparsable label {tokens[0]!r}") from None
        indices: list[int] = []
        values: list[float] = []
        prev = 0
        for token in tokens[1:]:
            idx_str, sep, val_str = token.partition(":")
            if not sep:
                raise SparseFormatError(f"line {lineno}: malformed pair {token!r}")
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise SparseFormatError(f"line {lineno}: malformed pair {token!r}") from None
            if idx < 1:
                raise SparseFormatError(f"line {lineno}: index {idx} is not 1-based")
            if idx <= prev:
                raise SparseFormatError(
                    f"line {lineno}: index {idx} not strictly increasing"
                )
            prev = idx
            indices.append(idx)
            values.append(val)
        rows.append((raw_label, indices, values))
    if not rows:
        raise SparseFormatError("document contains no records")

    dim = max((r[1][-1] for r in rows if r[1]), default=0)
    if dim == 0:
        raise SparseFormatError("document has no feature values")
    X = np.zeros((len(rows), dim), dtype=np.float64)
    raw = np.empty(len(rows), dtype=np.float64)
    for i, (label, indices, values) in enumerate(rows):
        raw[i] = label
        for idx, val in zip(indices, values):
            X[i, idx - 1] = val
    classes = np.unique(raw)
    mapping = {c: i for i, c in enumerate(classes)}
    y = np.array([mapping[v] for v in raw], dtype=np.int64)
    return Dataset(X, y, class_count=len(classes), raw_labels=tuple(float(c) for c in classes))


def serialize_sparse_dataset(dataset: Dataset) -> str:
    """Inverse of :func:`parse_sparse_dataset` up to zero-entry elision.

    Values are written with ``repr`` so parsing the output reproduces the
    dense matrix exactly.
    """
    lines = []
    for i in range(dataset.n_samples):
        if dataset.raw_labels is not None:
            label = repr(float(dataset.raw_labels[dataset.labels[i]]))
        else:
            label = str(int(dataset.labels[i]))
        parts = [label]
        row = dataset.features[i]
        for j in np.nonzero(row)[0]:
            parts.append(f"{j + 1}:{float(row[j])!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


class UnitBoxScaler(BaseEstimator, TransformerMixin):
    """Per-dimension min/max scaler onto [0, 1] with clamping.

    Learned on one sample (normally the training split) and applied to
    others; values outside the learned range are clamped to the box edge.
    Dimensions that are constant in the fitted data map to 0.5.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.mins_ = X.min(axis=0)
        self.maxs_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mins_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"dimension mismatch: got {X.shape[1]} features, expected {self.n_features_in_}"
            )
        span = self.maxs_ - self.mins_
        degenerate = span <= 0
        safe_span = np.where(degenerate, 1.0, span)
        out = (X - self.mins_) / safe_span
        out = np.clip(out, 0.0, 1.0)
        out[:, degenerate] = 0.5
        return out


def scale_splits(splits: Splits) -> tuple[Splits, UnitBoxScaler]:
    """Fit a UnitBoxScaler on the train split and apply it to all three."""
    scaler = UnitBoxScaler().fit(splits.train.features)
    scaled = [
        Dataset(scaler.transform(part.features), part.labels, part.class_count, part.raw_labels)
        for part in splits
    ]
    return Splits(*scaled), scaler


def _allocate(n_class: int, fractions: tuple[float, ...]) -> list[int]:
    # Floor allocation, remainders to the largest fractions first, then make
    # sure every split receives at least one member (feasible by the caller's
    # n_class >= len(fractions) check) by stealing from the fullest split.
    counts = [int(np.floor(n_class * f)) for f in fractions]
    remainder = n_class - sum(counts)
    order = sorted(range(len(fractions)), key=lambda s: (-fractions[s], s))
    for s in order[:remainder]:
        counts[s] += 1
    while any(c == 0 for c in counts):
        empty = counts.index(0)
        donor = int(np.argmax(counts))
        counts[donor] -= 1
        counts[empty] += 1
    return counts


def stratified_split(
    dataset: Dataset,
    fractions: tuple[float, ...] = (0.6, 0.2, 0.2),
    rng: np.random.Generator | int | None = None,
) -> Splits:
    """Split a dataset class-by-class into len(fractions) disjoint parts.

    Each class is shuffled and sliced proportionally, so per-split class
    proportions stay within one instance of the target fraction.  A class
    with fewer members than there are splits cannot be stratified and raises.
    """
    rng = as_rng(rng)
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) < 2:
        raise ValueError("need at least two split fractions")
    if any(f <= 0 for f in fractions):
        raise ValueError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {sum(fractions)}")

    n_splits = len(fractions)
    split_indices: list[list[np.ndarray]] = [[] for _ in range(n_splits)]
    for c in range(dataset.class_count):
        members = np.nonzero(dataset.labels == c)[0]
        if len(members) < n_splits:
            raise ValueError(
                f"class {c} has {len(members)} members, cannot stratify into {n_splits} splits"
            )
        members = members[rng.permutation(len(members))]
        counts = _allocate(len(members), fractions)
        start = 0
        for s, cnt in enumerate(counts):
            split_indices[s].append(members[start : start + cnt])
            start += cnt
    parts = []
    for s in range(n_splits):
        idx = np.sort(np.concatenate(split_indices[s]))
        parts.append(dataset.subset(idx))
    if n_splits == 3:
        return Splits(*parts)
    return tuple(parts)  # type: ignore[return-value]
