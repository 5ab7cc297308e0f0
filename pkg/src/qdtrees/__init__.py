"""Optimal quantile regression decision trees.

Learns one provably optimal decision tree per quantile level — all levels in
a single shared branch-and-bound search over binarized features — and turns
the per-sample quantile predictions into conditional densities via Gaussian
KDE.  See the README for the CLI and a code tour.
"""

from .dataset import (
    BINARY,
    CATEGORICAL,
    NUMERIC,
    BinarizeConfig,
    BinaryDataset,
    Column,
    DatasetError,
    Itemset,
    RawTable,
    TableSchema,
    apply_binarization,
    binarize,
    cover,
    load_csv,
    save_csv,
)
from .density import (
    Density,
    fallback_bandwidth,
    DensityError,
    cdf,
    curve,
    kde_from_quantiles,
    pdf,
    save_curve_csv,
)
from .metrics import (
    NLL_FLOOR,
    EvalReport,
    MetricsError,
    build_report,
    crps,
    mise,
    mqe,
    nll,
    per_quantile_losses,
    report_json,
    report_table,
)
from .model import (
    MODEL_SCHEMA_VERSION,
    Internal,
    Leaf,
    ModelError,
    ModelFormatError,
    QuantileModel,
    Tree,
    deserialize,
    format_tree,
    jaccard_matrix,
    partition,
    predict,
    predict_batch,
    serialize,
    tree_depth,
    tree_leaves,
    tree_loss,
    validate_tree,
    zone_summary,
)
from .quantiles import (
    INTERPOLATED,
    LEAF_VALUE_MODES,
    ORDER_STATISTIC,
    LeafEval,
    QuantileGrid,
    QuantileGridError,
    empirical_quantile,
    evaluate_leaf,
    evaluate_sorted,
    pinball_loss,
)
from .search import (
    FEATURE_ORDERS,
    STATIC,
    VARIANCE,
    CacheEntry,
    SearchCache,
    SearchConfig,
    SearchError,
    Searcher,
    SingleFit,
    can_return,
    fit_naive,
    fit_simultaneous,
    fit_single,
)
from .synth import (
    TARGET_COLUMN,
    GroundTruth,
    default_mean,
    default_std,
    SynthConfig,
    SynthError,
    gaussian_pdf,
    generate,
    load_ground_truth,
    save_ground_truth,
)

__version__ = "0.1.0"

__all__ = [
    "BINARY",
    "BinarizeConfig",
    "BinaryDataset",
    "CATEGORICAL",
    "CacheEntry",
    "Column",
    "DatasetError",
    "Density",
    "DensityError",
    "EvalReport",
    "FEATURE_ORDERS",
    "GroundTruth",
    "INTERPOLATED",
    "Internal",
    "Itemset",
    "LEAF_VALUE_MODES",
    "Leaf",
    "LeafEval",
    "MODEL_SCHEMA_VERSION",
    "MetricsError",
    "ModelError",
    "ModelFormatError",
    "NLL_FLOOR",
    "NUMERIC",
    "ORDER_STATISTIC",
    "QuantileGrid",
    "QuantileGridError",
    "QuantileModel",
    "RawTable",
    "STATIC",
    "SearchCache",
    "SearchConfig",
    "SearchError",
    "Searcher",
    "SingleFit",
    "SynthConfig",
    "SynthError",
    "TARGET_COLUMN",
    "TableSchema",
    "Tree",
    "VARIANCE",
    "apply_binarization",
    "binarize",
    "build_report",
    "can_return",
    "cdf",
    "cover",
    "crps",
    "curve",
    "default_mean",
    "default_std",
    "deserialize",
    "empirical_quantile",
    "evaluate_leaf",
    "evaluate_sorted",
    "fallback_bandwidth",
    "fit_naive",
    "fit_simultaneous",
    "fit_single",
    "format_tree",
    "gaussian_pdf",
    "generate",
    "jaccard_matrix",
    "kde_from_quantiles",
    "load_csv",
    "load_ground_truth",
    "mise",
    "mqe",
    "nll",
    "partition",
    "pdf",
    "per_quantile_losses",
    "pinball_loss",
    "predict",
    "predict_batch",
    "report_json",
    "report_table",
    "save_csv",
    "save_curve_csv",
    "save_ground_truth",
    "serialize",
    "tree_depth",
    "tree_leaves",
    "tree_loss",
    "validate_tree",
    "zone_summary",
]
