"""Experiment orchestration: configs, multi-size runs, summaries, reports.

An experiment takes one dataset and one model family, runs the sampler
search at each requested model size across several seeds, and aggregates the
outcomes into result rows.  Reports render those rows to CSV or JSON with a
fixed column order; the depth summary pools depth draws from the winning
parameter vectors, weighted by per-size improvement, into one smoothed curve.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .bag import Bag, build_bag
from .data import Dataset, Splits, parse_sparse_dataset, scale_splits, stratified_split
from .depthdist import DepthDistParams, sample_depth_values
from .learners import (
    SizedBoostedClassifier,
    SizedLinearClassifier,
    SizedTreeClassifier,
    floored_delta_f1,
)
from .optimizer import SearchResult, default_search_space, run_search
from .trees import fit_cart
from .validation import as_rng

#: Environment variable consulted for the experiment output directory.
OUTPUT_DIR_ENV = "TRAINDIST_OUTPUT_DIR"

FAMILIES = ("dt", "lpm", "gbm")

_REPORT_COLUMNS = (
    "dataset",
    "family",
    "size_requested",
    "size_realized",
    "f1_baseline",
    "f1_new",
    "delta_f1",
    "po_star",
    "alpha",
    "a",
    "b",
    "a_prime",
    "b_prime",
    "lambda",
    "sample_size",
    "p_o",
    "seeds",
)


class ConfigError(ValueError):
    """Raised when an experiment config document is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat bundle of every knob one experiment run needs."""

    dataset: str
    family: str
    sizes: tuple[int, ...]
    budget: int = 300
    repeats: int = 3
    seeds: tuple[int, ...] = (1, 2, 3)
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_seed: int = 0
    sample_size_min: int = 1000
    sample_size_max: int = 10000
    bag_size: int = 5
    epsilon: float = 0.2
    entropy_threshold: float = 0.15
    po_low: float = 0.1
    po_high: float = 0.9
    optimizer: str = "tpe"
    min_leaf: int = 1
    gbm_base_depth: int = 2
    gbm_learning_rate: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ConfigError("sizes must be a non-empty list of positive integers")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.budget < 1 or self.repeats < 1:
            raise ConfigError("budget and repeats must be >= 1")
        if not 1 <= self.sample_size_min < self.sample_size_max:
            raise ConfigError("need 1 <= sample_size_min < sample_size_max")
        if self.optimizer not in ("tpe", "random"):
            raise ConfigError(f"optimizer must be tpe or random, got {self.optimizer!r}")


_INT_KEYS = {
    "budget",
    "repeats",
    "split_seed",
    "sample_size_min",
    "sample_size_max",
    "bag_size",
    "min_leaf",
    "gbm_base_depth",
}
_FLOAT_KEYS = {"epsilon", "entropy_threshold", "po_low", "po_high", "gbm_learning_rate"}
_INT_LIST_KEYS = {"sizes", "seeds"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat ``key = value`` document into an ExperimentConfig.

    Blank lines and ``#`` comments are ignored; list values are comma
    separated; unknown keys are an error so typos fail loudly.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        value = value.strip()
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _INT_LIST_KEYS:
                values[key] = tuple(int(v.strip()) for v in value.split(",") if v.strip())
            elif key == "fractions":
                parts = tuple(float(v.strip()) for v in value.split(",") if v.strip())
                if len(parts) != 3:
                    raise ConfigError(f"line {lineno}: fractions needs three values")
                values[key] = parts
            elif key in ("dataset", "family", "optimizer"):
                values[key] = value
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {err}") from None
    for required in ("dataset", "family", "sizes"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    return ExperimentConfig(**values)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ----------------------------------------------------------------------
# experiment runner
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ResultRow:
    """One aggregated line of an experiment: a (dataset, family, size) cell.

    F1 fields are means over seeds; the improvement is recomputed from those
    means and floored at zero.  The parameter vector and adjusted original
    fraction come from the seed with the highest test score.
    """

    dataset: str
    family: str
    size_requested: int
    size_realized: int
    f1_baseline: float
    f1_new: float
    delta_f1: float
    po_star: float
    phi_star: dict
    seeds: tuple[int, ...]


@dataclass
class SeedOutcome:
    seed: int
    result: SearchResult


@dataclass
class ExperimentOutput:
    config: ExperimentConfig
    rows: list[ResultRow]
    outcomes: dict  # (size_requested, seed) -> SeedOutcome
    optimal_size: int | None
    reference_val_f1: float | None


def _make_estimator(config: ExperimentConfig, size: int):
    if config.family == "dt":
        return SizedTreeClassifier(max_depth=size, min_leaf=1)
    if config.family == "lpm":
        return SizedLinearClassifier(n_terms=size)
    return SizedBoostedClassifier(
        n_rounds=size,
        base_max_depth=config.gbm_base_depth,
        learning_rate=config.gbm_learning_rate,
    )


def run_experiment(
    config: ExperimentConfig, dataset: Dataset | None = None
) -> ExperimentOutput:
    """Run the search at every requested size across all seeds.

    The dataset is split once, scaled by the training split, and shared by
    all runs; each seed builds its own bag.  For the tree family the sizes
    ladder stops once the realized depth reaches the depth of an
    unrestricted reference tree, and rows landing on an already-seen
    realized depth are dropped.
    """
    if dataset is None:
        with open(config.dataset, "r", encoding="utf-8") as fh:
            dataset = parse_sparse_dataset(fh.read())
    splits = stratified_split(
        dataset,
        config.fractions,
        np.random.default_rng(np.random.SeedSequence([config.split_seed, 17])),
    )
    splits, _scaler = scale_splits(splits)
    train = splits.train

    space = default_search_space(config.sample_size_min, config.sample_size_max)

    optimal_size = None
    reference_val_f1 = None
    realized_of: dict[int, int] = {}
    sizes = sorted(set(config.sizes))
    if config.family == "dt":
        from .learners import evaluate_macro_f1

        reference = fit_cart(
            train.features, train.labels, train.class_count, min_leaf=config.min_leaf
        )
        optimal_size = reference.max_depth_reached
        reference_val_f1 = evaluate_macro_f1(reference, splits.val)
        for size in sizes:
            capped = fit_cart(
                train.features,
                train.labels,
                train.class_count,
                max_depth=size,
                min_leaf=config.min_leaf,
            )
            realized_of[size] = capped.max_depth_reached
    elif config.family == "lpm":
        sizes = [s for s in sizes if s <= train.dim]
        if not sizes:
            raise ConfigError(
                f"no requested size fits the {train.dim} available features"
            )

    bags: dict[int, Bag] = {}
    for seed in config.seeds:
        bags[seed] = build_bag(
            train,
            size=config.bag_size,
            epsilon=config.epsilon,
            rng=np.random.default_rng(np.random.SeedSequence([seed, 23])),
            min_leaf=config.min_leaf,
        )

    rows: list[ResultRow] = []
    outcomes: dict = {}
    seen_realized: set[int] = set()
    for size in sizes:
        realized = realized_of.get(size, size)
        if realized in seen_realized:
            continue
        seen_realized.add(realized)
        seed_outcomes: list[SeedOutcome] = []
        for seed in config.seeds:
            result = run_search(
                _make_estimator(config, size),
                splits,
                bags[seed],
                space,
                budget=config.budget,
                seed=seed,
                repeats=config.repeats,
                entropy_threshold=config.entropy_threshold,
                po_thresholds=(config.po_low, config.po_high),
                optimizer=config.optimizer,
            )
            outcome = SeedOutcome(seed=seed, result=result)
            seed_outcomes.append(outcome)
            outcomes[(size, seed)] = outcome
        f1_new = float(np.mean([o.result.test_score for o in seed_outcomes]))
        f1_baseline = float(np.mean([o.result.baseline_test_score for o in seed_outcomes]))
        representative = max(
            seed_outcomes, key=lambda o: (o.result.test_score, -o.seed)
        )
        rows.append(
            ResultRow(
                dataset=config.dataset,
                family=config.family,
                size_requested=size,
                size_realized=realized,
                f1_baseline=f1_baseline,
                f1_new=f1_new,
                delta_f1=floored_delta_f1(f1_new, f1_baseline),
                po_star=representative.result.adjusted_po,
                phi_star=dict(representative.result.best_params),
                seeds=tuple(config.seeds),
            )
        )
        if config.family == "dt" and optimal_size is not None and realized >= optimal_size:
            break
    return ExperimentOutput(
        config=config,
        rows=rows,
        outcomes=outcomes,
        optimal_size=optimal_size,
        reference_val_f1=reference_val_f1,
    )


# ----------------------------------------------------------------------
# depth summary
# ----------------------------------------------------------------------
@dataclass
class DepthSummary:
    allocations: tuple[int, ...]
    values: np.ndarray
    grid: np.ndarray
    density: np.ndarray


def silverman_bandwidth(values: np.ndarray) -> float:
    """Rule-of-thumb bandwidth for 1-d Gaussian KDEs."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        return 1e-3
    sd = float(values.std())
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    candidates = [s for s in (sd, iqr / 1.34) if s > 0]
    if not candidates:
        return 1e-3
    return 0.9 * min(candidates) * n ** (-0.2)


def gaussian_kde(values: np.ndarray, grid: np.ndarray, bandwidth: float) -> np.ndarray:
    z = (grid[:, None] - values[None, :]) / bandwidth
    return np.exp(-0.5 * z * z).sum(axis=1) / (values.size * bandwidth * math.sqrt(2 * math.pi))


def allocate_depth_draws(deltas, n_total: int) -> tuple[int, ...]:
    """Improvement-proportional draw counts, floored; uniform if all zero."""
    deltas = [max(0.0, float(d)) for d in deltas]
    if not deltas:
        raise ValueError("need at least one improvement value")
    total = sum(deltas)
    if total <= 0:
        return tuple(n_total // len(deltas) for _ in deltas)
    return tuple(int(math.floor(n_total * d / total)) for d in deltas)


def depth_summary(
    rows: list[ResultRow],
    n_total: int = 10000,
    rng: np.random.Generator | int | None = None,
    grid_size: int = 256,
    grid_span: tuple[float, float] = (-0.1, 1.1),
) -> DepthSummary:
    """Pool depth draws from each row's winning vector into one KDE curve.

    Rows contribute draws proportionally to their floored improvement, so the
    curve shows where in the tree the useful training mass came from.
    """
    if not rows:
        raise ValueError("need at least one result row")
    rng = as_rng(rng)
    allocations = allocate_depth_draws([r.delta_f1 for r in rows], n_total)
    pools = []
    for row, count in zip(rows, allocations):
        if count < 1:
            continue
        phi = row.phi_star
        psi = DepthDistParams(
            alpha=phi["alpha"],
            a=phi["a"],
            b=phi["b"],
            a_prime=phi["a_prime"],
            b_prime=phi["b_prime"],
        )
        pools.append(sample_depth_values(count, psi, rng))
    if not pools:
        raise ValueError("all allocations are zero; nothing to summarize")
    values = np.concatenate(pools)
    grid = np.linspace(grid_span[0], grid_span[1], grid_size)
    density = gaussian_kde(values, grid, silverman_bandwidth(values))
    return DepthSummary(
        allocations=allocations, values=values, grid=grid, density=density
    )


def depth_summary_csv(summary: DepthSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "density"])
    for r, d in zip(summary.grid, summary.density):
        writer.writerow([f"{r:.6f}", f"{d:.6f}"])
    return buf.getvalue()


# ----------------------------------------------------------------------
# reports
# ----------------------------------------------------------------------
def _row_cells(row: ResultRow) -> list[str]:
    phi = row.phi_star
    return [
        row.dataset,
        row.family,
        str(row.size_requested),
        str(row.size_realized),
        f"{row.f1_baseline:.6f}",
        f"{row.f1_new:.6f}",
        f"{row.delta_f1:.2f}",
        f"{row.po_star:.6f}",
        f"{phi['alpha']:.6g}",
        f"{phi['a']:.6g}",
        f"{phi['b']:.6g}",
        f"{phi['a_prime']:.6g}",
        f"{phi['b_prime']:.6g}",
        f"{phi['lambda']:.6g}",
        str(int(phi["sample_size"])),
        f"{phi['p_o']:.6g}",
        ";".join(str(s) for s in row.seeds),
    ]


def emit_report(rows: list[ResultRow], format: str = "csv") -> str:
    """Render result rows to CSV or JSON with a fixed field order."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_REPORT_COLUMNS)
        for row in rows:
            writer.writerow(_row_cells(row))
        return buf.getvalue()
    if format == "json":
        docs = []
        for row in rows:
            cells = _row_cells(row)
            doc = {}
            for name, cell in zip(_REPORT_COLUMNS, cells):
                if name in ("dataset", "family", "seeds"):
                    doc[name] = cell
                elif name in ("size_requested", "size_realized", "sample_size"):
                    doc[name] = int(cell)
                else:
                    doc[name] = float(cell)
            docs.append(doc)
        return json.dumps(docs, indent=2) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_report(text: str, format: str = "csv") -> list[ResultRow]:
    """Inverse of :func:`emit_report` at the formatted precision."""
    rows: list[ResultRow] = []
    if format == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != _REPORT_COLUMNS:
            raise ValueError("unexpected report header")
        records = [dict(zip(_REPORT_COLUMNS, cells)) for cells in reader if cells]
    elif format == "json":
        records = json.loads(text)
    else:
        raise ValueError(f"unknown report format {format!r}")
    for rec in records:
        phi = {
            "alpha": float(rec["alpha"]),
            "a": float(rec["a"]),
            "b": float(rec["b"]),
            "a_prime": float(rec["a_prime"]),
            "b_prime": float(rec["b_prime"]),
            "lambda": float(rec["lambda"]),
            "sample_size": int(rec["sample_size"]),
            "p_o": float(rec["p_o"]),
        }
        seeds = rec["seeds"]
        if isinstance(seeds, str):
            seeds = tuple(int(s) for s in seeds.split(";") if s)
        rows.append(
            ResultRow(
                dataset=str(rec["dataset"]),
                family=str(rec["family"]),
                size_requested=int(rec["size_requested"]),
                size_realized=int(rec["size_realized"]),
                f1_baseline=float(rec["f1_baseline"]),
                f1_new=float(rec["f1_new"]),
                delta_f1=float(rec["delta_f1"]),
                po_star=float(rec["po_star"]),
                phi_star=phi,
                seeds=tuple(seeds),
            )
        )
    return rows


def output_directory(override: str | None = None) -> str:
    """Resolve the output directory: explicit override, else env var, else cwd."""
    if override:
        return override
    return os.environ.get(OUTPUT_DIR_ENV, "traindist-results")


def write_experiment_outputs(output: ExperimentOutput, directory: str) -> dict:
    """Write rows.csv, rows.json, and per-run trial logs; returns the paths."""
    from .optimizer import trial_log_lines

    os.makedirs(directory, exist_ok=True)
    paths = {}
    csv_path = os.path.join(directory, "rows.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(emit_report(output.rows, "csv"))
    paths["rows.csv"] = csv_path
    json_path = os.path.join(directory, "rows.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(emit_report(output.rows, "json"))
    paths["rows.json"] = json_path
    trials_dir = os.path.join(directory, "trials")
    os.makedirs(trials_dir, exist_ok=True)
    for (size, seed), outcome in sorted(output.outcomes.items()):
        log_path = os.path.join(trials_dir, f"size{size}_seed{seed}.jsonl")
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write(trial_log_lines(outcome.result.trials))
        paths[f"trials/size{size}_seed{seed}.jsonl"] = log_path
    return paths
