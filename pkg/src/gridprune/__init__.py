"""Two-stage visual-token pruning on pre-extracted tensor fields.

Stage one answers "where to look": per-zone mean text relevance is pushed
through a softmax and rounded into integer zone budgets. Stage two answers
"what to select": each zone keeps its own top tokens by a fused
relevance/saliency score. Global top-k and tail-k baselines, synthetic
corpora, positional-bias diagnostics and a decoder FLOPs model round out
the toolkit.
"""

from .errors import (
    AlphaOutOfRange,
    BudgetExceedsCapacity,
    GridPruneError,
    InvalidBlockSize,
    InvalidRect,
    ManifestError,
    MissingBlob,
    MixedN,
    NonFiniteValue,
    ShapeMismatch,
    VersionUnsupported,
    ZeroNormText,
    ZeroNormTokenWarning,
)
from .field import Manifest, TokenField, load_field, save_field
from .scoring import ScoreSet, fuse, minmax_normalize, relevance_scores, saliency_scores, score_field
from .zones import (
    BudgetAllocation,
    Selection,
    Zone,
    ZoneMap,
    allocate,
    global_topk,
    partition,
    round_budgets,
    select,
    selection_from_dict,
    selection_to_dict,
    selection_to_json,
    softmax,
    tail_k_baseline,
    zone_relevance,
)
from .pipeline import (
    ALPHA_PRESETS,
    HighResInput,
    HighResSelection,
    PruneConfig,
    gather_embeddings,
    grid_prune,
    high_res_to_dict,
    load_high_res,
    preset_alpha,
    prune_high_res,
    save_high_res,
)
from .diagnostics import (
    METHODS,
    BiasReport,
    ComparisonTable,
    FlopsModel,
    MethodRow,
    bias_report,
    compare,
    empty_report,
    flops,
    merge_reports,
    recall,
    tail_start,
)
from .synth import ATTN_HEADS, PATTERNS, SceneSpec, generate, planted_cosine_floor
from .estimator import GlobalTopKPruner, GridPruner, TailKPruner

__version__ = "0.1.0"

__all__ = [
    "ALPHA_PRESETS",
    "ATTN_HEADS",
    "AlphaOutOfRange",
    "BiasReport",
    "BudgetAllocation",
    "BudgetExceedsCapacity",
    "ComparisonTable",
    "FlopsModel",
    "GlobalTopKPruner",
    "GridPruneError",
    "GridPruner",
    "HighResInput",
    "HighResSelection",
    "InvalidBlockSize",
    "InvalidRect",
    "METHODS",
    "Manifest",
    "ManifestError",
    "MethodRow",
    "MissingBlob",
    "MixedN",
    "NonFiniteValue",
    "PATTERNS",
    "PruneConfig",
    "SceneSpec",
    "ScoreSet",
    "Selection",
    "ShapeMismatch",
    "TailKPruner",
    "TokenField",
    "VersionUnsupported",
    "Zone",
    "ZoneMap",
    "ZeroNormText",
    "ZeroNormTokenWarning",
    "allocate",
    "bias_report",
    "compare",
    "empty_report",
    "flops",
    "fuse",
    "gather_embeddings",
    "generate",
    "global_topk",
    "grid_prune",
    "high_res_to_dict",
    "load_field",
    "load_high_res",
    "merge_reports",
    "minmax_normalize",
    "partition",
    "planted_cosine_floor",
    "preset_alpha",
    "prune_high_res",
    "recall",
    "relevance_scores",
    "round_budgets",
    "saliency_scores",
    "save_field",
    "save_high_res",
    "score_field",
    "select",
    "selection_from_dict",
    "selection_to_dict",
    "selection_to_json",
    "softmax",
    "tail_k_baseline",
    "tail_start",
    "zone_relevance",
]
