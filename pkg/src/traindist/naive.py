"""Direct density-reweighting baseline over the raw input space.

Instead of modeling boundary structure through trees, this path places a
Dirichlet-process mixture of per-dimension Beta densities directly on the
unit box and resamples training points by their mixture weights.  The
searched vector grows linearly with the input dimension (four Beta shapes
per dimension plus the concentration), which is why the approach is guarded
to low-dimensional data and kept as a comparison baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from .data import Dataset, Splits
from .depthdist import beta_variate, crp_assignments
from .learners import evaluate_macro_f1
from .optimizer import SearchSpace, Trial, Variable, make_optimizer
from .validation import as_rng, check_positive

#: Dimension guard; beyond this the tree-based path is the intended tool.
DEFAULT_DIM_LIMIT = 4

#: Coordinates are clamped inside the open unit box before Beta densities.
COORD_EPS = 1e-9


@dataclass(frozen=True)
class FullIbmmParams:
    """Concentration plus per-dimension (a, b, a_prime, b_prime) priors."""

    alpha: float
    shape_priors: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self):
        check_positive(self.alpha, "alpha")
        if not self.shape_priors:
            raise ValueError("need shape priors for at least one dimension")
        for dims in self.shape_priors:
            if len(dims) != 4:
                raise ValueError("each dimension needs exactly four prior shapes")
            for v in dims:
                check_positive(v, "prior shape")

    @property
    def dim(self) -> int:
        return len(self.shape_priors)

    @classmethod
    def from_flat(cls, params: dict, dim: int) -> "FullIbmmParams":
        priors = tuple(
            (
                params[f"a_{j}"],
                params[f"b_{j}"],
                params[f"a_prime_{j}"],
                params[f"b_prime_{j}"],
            )
            for j in range(dim)
        )
        return cls(alpha=params["alpha"], shape_priors=priors)


def full_search_space(dim: int, alpha_max: float = 14.0) -> SearchSpace:
    """The 4 * dim + 1 variable space of the direct-reweighting path."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    variables = [Variable("alpha", 0.1, alpha_max)]
    for j in range(dim):
        for prefix in ("a", "b", "a_prime", "b_prime"):
            variables.append(Variable(f"{prefix}_{j}", 0.1, 10.0))
    return SearchSpace(tuple(variables))


def _beta_log_density(x: np.ndarray, a: float, b: float) -> np.ndarray:
    betaln = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - betaln


def ibmm_resample(
    train: Dataset,
    params: FullIbmmParams,
    n: int,
    rng: np.random.Generator | int | None = None,
) -> Dataset:
    """Resample ``n`` training rows by mixture-component density weights.

    A partition with concentration alpha splits the n draws into components;
    each component draws per-dimension Beta shapes from the priors, weights
    every training point by its product density (computed in log space), and
    then draws its rows with replacement proportionally to those weights.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if params.dim != train.dim:
        raise ValueError(
            f"params cover {params.dim} dimensions, data has {train.dim}"
        )
    rng = as_rng(rng)
    X = np.clip(train.features, COORD_EPS, 1.0 - COORD_EPS)
    assign = crp_assignments(n, params.alpha, rng)
    counts = np.bincount(assign)
    rows = np.empty(n, dtype=np.int64)
    for comp, count in enumerate(counts):
        log_w = np.zeros(train.n_samples)
        for j, (a, b, a_p, b_p) in enumerate(params.shape_priors):
            shape_a = beta_variate(rng, a, b)
            shape_b = beta_variate(rng, a_p, b_p)
            log_w += _beta_log_density(X[:, j], shape_a, shape_b)
        w = np.exp(log_w - log_w.max())
        p = w / w.sum()
        rows[assign == comp] = rng.choice(train.n_samples, size=int(count), replace=True, p=p)
    return Dataset(
        train.features[rows].copy(), train.labels[rows].copy(), train.class_count
    )


@dataclass
class NaiveSearchResult:
    trials: list[Trial]
    best_index: int
    best_params: dict
    model: object
    test_score: float

    @property
    def best_trial(self) -> Trial:
        return self.trials[self.best_index - 1]


def naive_search(
    model,
    splits: Splits,
    budget: int,
    n_sample: int,
    seed: int,
    repeats: int = 3,
    dim_limit: int = DEFAULT_DIM_LIMIT,
    optimizer: str = "tpe",
    optimizer_options: dict | None = None,
) -> NaiveSearchResult:
    """Search the direct-reweighting space with the same suggest/evaluate loop.

    Refuses data wider than ``dim_limit``: the searched vector has 4d + 1
    variables, so higher dimensions belong to the tree-based path.
    """
    train, val, test = splits.train, splits.val, splits.test
    if train.dim > dim_limit:
        raise ValueError(
            f"data has {train.dim} dimensions, limit is {dim_limit}; "
            "use the density-tree search for wider data"
        )
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    space = full_search_space(train.dim)
    opt = make_optimizer(
        optimizer,
        space,
        np.random.default_rng(np.random.SeedSequence([seed, 0])),
        **(optimizer_options or {}),
    )

    trials: list[Trial] = []
    for t in range(1, budget + 1):
        params = opt.ask()
        full = FullIbmmParams.from_flat(params, train.dim)
        scores = []
        for j in range(1, repeats + 1):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 1, t, j]))
            sample = ibmm_resample(train, full, n_sample, rng)
            est = clone(model).fit(sample.features, sample.labels)
            scores.append(evaluate_macro_f1(est, val))
        trial = Trial(
            index=t,
            params=params,
            adjusted_po=0.0,
            repeat_scores=tuple(scores),
            score=float(np.mean(scores)),
        )
        trials.append(trial)
        opt.tell(params, trial.score)

    best_index = 1 + int(np.argmax([t.score for t in trials]))
    best = trials[best_index - 1]
    # Replay the best-validated repeat rather than drawing a fresh sample.
    chosen = 1 + int(np.argmax(best.repeat_scores))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, best.index, chosen]))
    sample = ibmm_resample(train, FullIbmmParams.from_flat(best.params, train.dim), n_sample, rng)
    final_model = clone(model).fit(sample.features, sample.labels)
    return NaiveSearchResult(
        trials=trials,
        best_index=best_index,
        best_params=dict(best.params),
        model=final_model,
        test_score=evaluate_macro_f1(final_model, test),
    )
