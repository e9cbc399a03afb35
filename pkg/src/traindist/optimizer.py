"""Box-constrained black-box search over the sampling distribution knobs.

The searched vector has eight variables: the five depth-mixture parameters,
the synthetic sample size, the pmf smoothing constant (searched on a log10
scale), and the fraction of the sample taken verbatim from the original
training split.  Suggestions come from a tree-structured Parzen estimator:
after a uniform startup phase the history is split into a small elite set and
the rest, each variable gets a pair of 1-d adaptive Parzen mixtures, and the
candidate maximizing the elite/rest density ratio wins.
A plain uniform random strategy is available as a baseline.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from sklearn.base import clone

from .bag import Bag, sample_from_bag
from .data import Dataset, Splits
from .depthdist import DepthDistParams, sample_depth_values
from .learners import evaluate_macro_f1, floored_delta_f1
from .validation import as_rng, check_probability

#: Names of the eight sampler variables, in canonical order.
SAMPLER_VARIABLES = (
    "alpha",
    "a",
    "b",
    "a_prime",
    "b_prime",
    "lambda",
    "sample_size",
    "p_o",
)

_TPE_GAMMA = 0.10
_TPE_GOOD_CAP = 25
_TPE_STARTUP = 20
_TPE_CANDIDATES = 24


@dataclass(frozen=True)
class Variable:
    """One box-constrained search variable, optionally log10-scaled or integer."""

    name: str
    low: float
    high: float
    scale: str = "linear"
    integer: bool = False

    def __post_init__(self):
        if self.scale not in ("linear", "log10"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: low must be < high")
        if self.scale == "log10" and self.low <= 0:
            raise ValueError(f"{self.name}: log10 scale needs positive bounds")

    def to_internal(self, value: float) -> float:
        return math.log10(value) if self.scale == "log10" else float(value)

    def from_internal(self, value: float) -> float:
        out = 10.0**value if self.scale == "log10" else float(value)
        out = min(max(out, self.low), self.high)
        if self.integer:
            out = int(round(out))
        return out

    @property
    def internal_bounds(self) -> tuple[float, float]:
        return self.to_internal(self.low), self.to_internal(self.high)

    def sample(self, rng: np.random.Generator) -> float:
        lo, hi = self.internal_bounds
        return self.from_internal(lo + rng.random() * (hi - lo))


@dataclass(frozen=True)
class SearchSpace:
    """An ordered collection of uniquely named variables."""

    variables: tuple[Variable, ...]

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if not names:
            raise ValueError("search space needs at least one variable")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def __getitem__(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def sample_uniform(self, rng: np.random.Generator | int | None = None) -> dict:
        rng = as_rng(rng)
        return {v.name: v.sample(rng) for v in self.variables}

    def contains(self, params: dict) -> bool:
        return all(v.low <= params[v.name] <= v.high for v in self.variables)


def default_search_space(
    sample_size_min: int = 1000,
    sample_size_max: int = 10000,
    alpha_max: float = 14.0,
) -> SearchSpace:
    """The eight-variable sampler space with its standard bounds."""
    if not 1 <= sample_size_min < sample_size_max:
        raise ValueError("need 1 <= sample_size_min < sample_size_max")
    return SearchSpace(
        (
            Variable("alpha", 0.1, alpha_max),
            Variable("a", 0.1, 10.0),
            Variable("b", 0.1, 10.0),
            Variable("a_prime", 0.1, 10.0),
            Variable("b_prime", 0.1, 10.0),
            Variable("lambda", 1e-3, 1e3, scale="log10"),
            Variable("sample_size", sample_size_min, sample_size_max, integer=True),
            Variable("p_o", 0.0, 1.0),
        )
    )


def adjust_po(p: float, low: float = 0.1, high: float = 0.9) -> float:
    """Snap an original-data fraction to 0 or 1 outside the given thresholds."""
    p = check_probability(p, "p_o")
    low = check_probability(low, "low threshold")
    high = check_probability(high, "high threshold")
    if not low < high:
        raise ValueError(f"thresholds must satisfy low < high, got {low} >= {high}")
    if p < low:
        return 0.0
    if p > high:
        return 1.0
    return p


# ----------------------------------------------------------------------
# suggestion strategies
# ----------------------------------------------------------------------
def _neighbor_bandwidths(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Per-sample bandwidths from neighbor spacing (adaptive Parzen).

    Each sample's bandwidth is its larger gap to the adjacent sorted value,
    with the box edges padding the ends.  Duplicated samples would collapse
    to zero, so bandwidths are floored at width / min(100, n); that floor is
    what keeps a cluster of identical observations from freezing the search.
    """
    width = hi - lo
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    left = np.diff(np.concatenate(([lo], sorted_vals)))
    right = np.diff(np.concatenate((sorted_vals, [hi])))
    bw = np.empty_like(values)
    bw[order] = np.maximum(left, right)
    floor = width / min(100.0, max(float(values.size), 2.0))
    return np.clip(bw, floor, width)


def _log_mixture(
    points: np.ndarray,
    samples: np.ndarray,
    bandwidths: np.ndarray,
    lo: float,
    hi: float,
) -> np.ndarray:
    """Stable log density of a Gaussian mixture plus one uniform component.

    The uniform component carries the same 1 / (n + 1) weight as each sample
    Gaussian and keeps the density positive everywhere in the box, so no
    region of the space can ever look impossible to the acquisition ratio.
    """
    z = (points[:, None] - samples[None, :]) / bandwidths[None, :]
    comp = -0.5 * z * z - np.log(bandwidths * math.sqrt(2 * math.pi))[None, :]
    prior = np.full((points.shape[0], 1), -math.log(hi - lo))
    comp = np.concatenate([comp, prior], axis=1)
    m = comp.max(axis=1)
    inner = np.exp(comp - m[:, None]).sum(axis=1)
    return m + np.log(inner) - math.log(samples.size + 1)


def _history_arrays(history) -> tuple[list[dict], np.ndarray]:
    params = []
    scores = []
    for item in history:
        if hasattr(item, "params"):
            params.append(item.params)
            scores.append(item.score)
        else:
            p, s = item
            params.append(p)
            scores.append(s)
    return params, np.asarray(scores, dtype=np.float64)


def suggest(
    space: SearchSpace,
    history,
    rng: np.random.Generator | int | None = None,
    strategy: str = "tpe",
    gamma: float = _TPE_GAMMA,
    n_startup: int = _TPE_STARTUP,
    n_candidates: int = _TPE_CANDIDATES,
) -> dict:
    """Propose the next point to evaluate (scores are maximized).

    ``history`` is a sequence of (params, score) pairs or of objects with
    ``params`` and ``score`` attributes.  Until ``n_startup`` observations
    exist, or always under the random strategy, draws are uniform in the box.
    """
    if strategy not in ("tpe", "random"):
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = as_rng(rng)
    params, scores = _history_arrays(history)
    if strategy == "random" or scores.size < n_startup:
        return space.sample_uniform(rng)

    # Elite count grows with the history but is capped so the good-side
    # mixture stays sharp late in a long search.
    n_good = max(1, min(math.ceil(gamma * scores.size), _TPE_GOOD_CAP))
    # Stable sort keeps earlier trials first among equal scores.
    order = np.argsort(-scores, kind="stable")
    good_mask = np.zeros(scores.size, dtype=bool)
    good_mask[order[:n_good]] = True
    out = {}
    for var in space.variables:
        lo, hi = var.internal_bounds
        width = hi - lo
        values = np.array([var.to_internal(p[var.name]) for p in params])
        good = values[good_mask]
        bad = values[~good_mask]
        if bad.size == 0:
            bad = values
        bw_good = _neighbor_bandwidths(good, lo, hi)
        bw_bad = _neighbor_bandwidths(bad, lo, hi)
        # Candidates come from the good mixture itself: each picks one of the
        # good-point Gaussians or, with weight 1 / (n_good + 1), the uniform
        # prior component.
        picks = rng.integers(0, good.size + 1, n_candidates)
        from_prior = picks == good.size
        candidates = np.empty(n_candidates)
        candidates[from_prior] = lo + width * rng.random(int(from_prior.sum()))
        seeded = ~from_prior
        candidates[seeded] = np.clip(
            good[picks[seeded]]
            + bw_good[picks[seeded]] * rng.standard_normal(int(seeded.sum())),
            lo,
            hi,
        )
        gain = _log_mixture(candidates, good, bw_good, lo, hi) - _log_mixture(
            candidates, bad, bw_bad, lo, hi
        )
        out[var.name] = var.from_internal(float(candidates[int(np.argmax(gain))]))
    return out


class TpeSearch:
    """Ask/tell wrapper around :func:`suggest` with the TPE strategy."""

    strategy = "tpe"

    def __init__(
        self,
        space: SearchSpace,
        rng: np.random.Generator | int | None = None,
        gamma: float = _TPE_GAMMA,
        n_startup: int = _TPE_STARTUP,
        n_candidates: int = _TPE_CANDIDATES,
    ):
        self.space = space
        self.rng = as_rng(rng)
        self.gamma = gamma
        self.n_startup = n_startup
        self.n_candidates = n_candidates
        self.history: list[tuple[dict, float]] = []

    def ask(self) -> dict:
        return suggest(
            self.space,
            self.history,
            self.rng,
            strategy=self.strategy,
            gamma=self.gamma,
            n_startup=self.n_startup,
            n_candidates=self.n_candidates,
        )

    def tell(self, params: dict, score: float) -> None:
        self.history.append((dict(params), float(score)))

    @property
    def best(self) -> tuple[dict, float]:
        if not self.history:
            raise ValueError("no observations yet")
        i = int(np.argmax([s for _, s in self.history]))
        return self.history[i]


class RandomSearch(TpeSearch):
    """Uniform random-search baseline with the same ask/tell interface."""

    strategy = "random"


def make_optimizer(
    name: str, space: SearchSpace, rng: np.random.Generator | int | None = None, **options
) -> TpeSearch:
    if name == "tpe":
        return TpeSearch(space, rng, **options)
    if name == "random":
        return RandomSearch(space, rng, **options)
    raise ValueError(f"unknown optimizer {name!r}")


# ----------------------------------------------------------------------
# trial bookkeeping
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Trial:
    """One evaluated parameter vector with its per-repeat validation scores."""

    index: int
    params: dict
    adjusted_po: float
    repeat_scores: tuple[float, ...]
    score: float
    pinned: bool = False

    def to_record(self) -> dict:
        return {
            "trial": self.index,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "adjusted_po": self.adjusted_po,
            "repeat_scores": list(self.repeat_scores),
            "score": self.score,
            "pinned": self.pinned,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Trial":
        return cls(
            index=int(record["trial"]),
            params=dict(record["params"]),
            adjusted_po=float(record["adjusted_po"]),
            repeat_scores=tuple(float(s) for s in record["repeat_scores"]),
            score=float(record["score"]),
            pinned=bool(record["pinned"]),
        )


def trial_log_lines(trials: Iterable[Trial]) -> str:
    """JSON-lines rendering of a trial sequence, one trial per line."""
    return "".join(json.dumps(t.to_record(), separators=(",", ":")) + "\n" for t in trials)


def read_trial_log(text: str) -> list[Trial]:
    return [Trial.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]


# ----------------------------------------------------------------------
# the search loop
# ----------------------------------------------------------------------
@dataclass
class SearchResult:
    """Outcome of one search: the winning trial, its retrained model, scores."""

    trials: list[Trial]
    best_index: int
    best_params: dict
    adjusted_po: float
    model: object
    test_score: float
    baseline_test_score: float

    @property
    def best_trial(self) -> Trial:
        return self.trials[self.best_index - 1]

    @property
    def improvement(self) -> float:
        return floored_delta_f1(self.test_score, self.baseline_test_score)


def _stratified_resample(
    train: Dataset, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample n rows, class counts proportional to the split.

    A class target that fits inside the class is drawn without replacement,
    so requesting exactly the split size returns the split itself; targets
    beyond the class size fall back to drawing with replacement.
    """
    counts = train.class_histogram()
    present = np.nonzero(counts)[0]
    fractions = counts[present] / counts[present].sum()
    targets = np.floor(n * fractions).astype(np.int64)
    remainder = n - targets.sum()
    frac_part = n * fractions - np.floor(n * fractions)
    for c in np.argsort(-frac_part, kind="stable")[:remainder]:
        targets[c] += 1
    rows = []
    for c, target in zip(present, targets):
        if target == 0:
            continue
        members = np.nonzero(train.labels == c)[0]
        if target <= members.size:
            picked = rng.choice(members, size=target, replace=False)
        else:
            picked = members[rng.integers(0, members.size, target)]
        rows.append(picked)
    rows = np.sort(np.concatenate(rows)) if rows else np.empty(0, dtype=np.int64)
    return train.features[rows], train.labels[rows]


def draw_trial_sample(
    params: dict,
    adjusted_po: float,
    train: Dataset,
    bag: Bag,
    entropy_threshold: float,
    rng: np.random.Generator | int | None = None,
) -> Dataset:
    """Materialize one trial's training sample from a parameter vector.

    The sample holds exactly round(adjusted_po * sample_size) stratified
    resamples of the original split, labels untouched, followed by the
    remaining points drawn from the bag under the vector's depth mixture and
    smoothing constant.
    """
    rng = as_rng(rng)
    n_total = int(params["sample_size"])
    if n_total < 1:
        raise ValueError("sample_size must be >= 1")
    n_orig = int(math.floor(adjusted_po * n_total + 0.5))
    n_orig = min(max(n_orig, 0), n_total)
    parts_X = []
    parts_y = []
    if n_orig > 0:
        X_o, y_o = _stratified_resample(train, n_orig, rng)
        parts_X.append(X_o)
        parts_y.append(y_o)
    n_bag = n_total - n_orig
    if n_bag > 0:
        psi = DepthDistParams(
            alpha=params["alpha"],
            a=params["a"],
            b=params["b"],
            a_prime=params["a_prime"],
            b_prime=params["b_prime"],
        )
        sampler = lambda count, r: sample_depth_values(count, psi, r)
        bag_part = sample_from_bag(
            n_bag, bag, sampler, params["lambda"], entropy_threshold, rng
        )
        parts_X.append(bag_part.features)
        parts_y.append(bag_part.labels)
    return Dataset(
        np.concatenate(parts_X, axis=0),
        np.concatenate(parts_y, axis=0),
        class_count=train.class_count,
    )


def _pinned_params(space: SearchSpace, n_train: int) -> dict:
    """Trial 1: the original distribution at the largest affordable sample size."""
    params = {}
    for var in space.variables:
        lo, hi = var.internal_bounds
        params[var.name] = var.from_internal((lo + hi) / 2.0)
    ns_var = space["sample_size"]
    params["sample_size"] = int(min(ns_var.high, n_train))
    params["p_o"] = 1.0
    return params


def run_search(
    model,
    splits: Splits,
    bag: Bag,
    space: SearchSpace,
    budget: int,
    seed: int,
    repeats: int = 3,
    entropy_threshold: float = 0.15,
    po_thresholds: tuple[float, float] = (0.1, 0.9),
    optimizer: str = "tpe",
    optimizer_options: dict | None = None,
) -> SearchResult:
    """Search the sampler space for the distribution that trains ``model`` best.

    Every trial materializes a sample, fits a clone of ``model`` on it, and
    scores validation macro-F1, averaged over ``repeats`` independently
    seeded repetitions.  Trial 1 is pinned to the original distribution so
    the search result can never be selected below that baseline silently.
    The returned model is rebuilt from the best trial (ties to the
    earliest) by replaying its recorded repeat streams and keeping the
    repeat with the highest validation score, so the model scored on the
    test split is one that was actually validated rather than a fresh
    draw.  The pinned vector is rebuilt the same way to give the baseline
    test score.  Everything is deterministic given (seed, config), and
    the validation and test splits are never modified.
    """
    missing = [name for name in SAMPLER_VARIABLES if name not in space.names]
    if missing:
        raise ValueError(f"search space is missing the sampler variables {missing}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")

    train, val, test = splits.train, splits.val, splits.test
    opt = make_optimizer(
        optimizer,
        space,
        np.random.default_rng(np.random.SeedSequence([seed, 0])),
        **(optimizer_options or {}),
    )

    def evaluate(params: dict, adjusted: float, trial_index: int, dataset: Dataset, stream: int):
        scores = []
        for j in range(1, repeats + 1):
            rng = np.random.default_rng(np.random.SeedSequence([seed, stream, trial_index, j]))
            sample = draw_trial_sample(params, adjusted, train, bag, entropy_threshold, rng)
            est = clone(model).fit(sample.features, sample.labels)
            scores.append(evaluate_macro_f1(est, dataset))
        return scores

    trials: list[Trial] = []
    for t in range(1, budget + 1):
        if t == 1:
            params = _pinned_params(space, train.n_samples)
        else:
            params = opt.ask()
        adjusted = adjust_po(params["p_o"], *po_thresholds)
        repeat_scores = evaluate(params, adjusted, t, val, stream=1)
        trial = Trial(
            index=t,
            params=params,
            adjusted_po=adjusted,
            repeat_scores=tuple(repeat_scores),
            score=float(np.mean(repeat_scores)),
            pinned=(t == 1),
        )
        trials.append(trial)
        opt.tell(params, trial.score)

    best_index = 1 + int(np.argmax([t.score for t in trials]))
    best = trials[best_index - 1]

    def rebuild(trial: Trial):
        # Replay the trial's repeat streams and keep the repeat that
        # validated best; the test score then belongs to a model the
        # search actually saw instead of to an extra unvetted draw.
        chosen = 1 + int(np.argmax(trial.repeat_scores))
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1, trial.index, chosen]))
        sample = draw_trial_sample(
            trial.params, trial.adjusted_po, train, bag, entropy_threshold, rng
        )
        est = clone(model).fit(sample.features, sample.labels)
        return est, evaluate_macro_f1(est, test)

    final_model, test_score = rebuild(best)
    if best.index == 1:
        baseline_score = test_score
    else:
        _, baseline_score = rebuild(trials[0])
    return SearchResult(
        trials=trials,
        best_index=best_index,
        best_params=dict(best.params),
        adjusted_po=best.adjusted_po,
        model=final_model,
        test_score=test_score,
        baseline_test_score=baseline_score,
    )
