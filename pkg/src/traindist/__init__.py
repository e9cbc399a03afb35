"""traindist: search for the training distribution a small model learns best from.

Size-constrained classifiers (shallow trees, tiny linear models, short
boosting runs) often learn more from a carefully skewed training sample than
from the original data distribution.  This package fits unrestricted CART
"density trees" over randomly sheared copies of the training data, turns
their node boxes into boundary-concentrated sampling distributions, mixes in
verbatim training points, and searches the sampler's eight knobs with a
tree-structured Parzen estimator so that validation macro-F1 of the small
model is maximized.
"""

from .data import (
    Dataset,
    SparseFormatError,
    Splits,
    UnitBoxScaler,
    parse_sparse_dataset,
    scale_splits,
    serialize_sparse_dataset,
    stratified_split,
)
from .trees import (
    Box,
    DensityTree,
    NodePmf,
    TreeNode,
    base_pmf,
    fit_cart,
    majority_label,
    node_entropy,
    sample_uniform_in_region,
    smooth_pmf,
)
from .bag import Bag, Transform, build_bag, near_identity_matrix, sample_from_bag
from .depthdist import (
    DepthDistParams,
    alpha_upper_bound,
    beta_variate,
    crp_assignments,
    expected_components,
    gamma_variate,
    harmonic_number,
    partition_counts,
    sample_depth_values,
)
from .learners import (
    SizedBoostedClassifier,
    SizedLinearClassifier,
    SizedTreeClassifier,
    delta_f1,
    evaluate_macro_f1,
    floored_delta_f1,
    macro_f1,
)
from .optimizer import (
    RandomSearch,
    SearchResult,
    SearchSpace,
    TpeSearch,
    Trial,
    Variable,
    adjust_po,
    default_search_space,
    draw_trial_sample,
    make_optimizer,
    read_trial_log,
    run_search,
    suggest,
    trial_log_lines,
)
from .naive import (
    FullIbmmParams,
    NaiveSearchResult,
    full_search_space,
    ibmm_resample,
    naive_search,
)
from .harness import (
    ConfigError,
    DepthSummary,
    ExperimentConfig,
    ExperimentOutput,
    ResultRow,
    depth_summary,
    depth_summary_csv,
    emit_report,
    load_config,
    output_directory,
    parse_config,
    parse_report,
    run_experiment,
    write_experiment_outputs,
)
from .synthetic import make_concentric, make_grid_blobs, make_xor

__version__ = "0.1.0"

__all__ = [
    "Bag",
    "Box",
    "ConfigError",
    "Dataset",
    "DensityTree",
    "DepthDistParams",
    "DepthSummary",
    "ExperimentConfig",
    "ExperimentOutput",
    "FullIbmmParams",
    "NaiveSearchResult",
    "NodePmf",
    "RandomSearch",
    "ResultRow",
    "SearchResult",
    "SearchSpace",
    "SizedBoostedClassifier",
    "SizedLinearClassifier",
    "SizedTreeClassifier",
    "SparseFormatError",
    "Splits",
    "TpeSearch",
    "Transform",
    "TreeNode",
    "Trial",
    "UnitBoxScaler",
    "Variable",
    "adjust_po",
    "alpha_upper_bound",
    "base_pmf",
    "beta_variate",
    "build_bag",
    "crp_assignments",
    "default_search_space",
    "delta_f1",
    "depth_summary",
    "depth_summary_csv",
    "draw_trial_sample",
    "emit_report",
    "evaluate_macro_f1",
    "expected_components",
    "fit_cart",
    "floored_delta_f1",
    "full_search_space",
    "gamma_variate",
    "harmonic_number",
    "ibmm_resample",
    "load_config",
    "macro_f1",
    "majority_label",
    "make_concentric",
    "make_grid_blobs",
    "make_optimizer",
    "make_xor",
    "naive_search",
    "near_identity_matrix",
    "node_entropy",
    "output_directory",
    "parse_config",
    "parse_report",
    "parse_sparse_dataset",
    "partition_counts",
    "read_trial_log",
    "run_experiment",
    "run_search",
    "sample_depth_values",
    "sample_from_bag",
    "sample_uniform_in_region",
    "scale_splits",
    "serialize_sparse_dataset",
    "smooth_pmf",
    "stratified_split",
    "suggest",
    "trial_log_lines",
    "write_experiment_outputs",
]
