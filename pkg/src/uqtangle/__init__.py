"""Evaluation engine for uncertainty decomposition in image segmentation.

Decomposes per-image sample grids into aleatoric/epistemic/total uncertainty
maps, scores them on downstream tasks (distribution-shift detection, ambiguity
modeling, calibration), and quantifies how entangled the two uncertainty
sources are. Includes synthetic worlds with exact oracles so the entire
pipeline can be verified without any trained model.
"""

__version__ = "0.1.0"

from .aggregation import (
    AggregationStrategy,
    aggregate_area_normalized,
    aggregate_border_normalized,
    aggregate_mean,
    aggregate_patch_max,
    aggregate_threshold,
    apply_strategy,
    border_length,
    label_map,
)
from .decomposition import (
    SampleGrid,
    UncertaintyMaps,
    bma,
    decompose,
    decompose_no_eu,
    shannon_entropy,
)
from .entanglement import (
    TaskResult,
    TaskSpec,
    assign_measures,
    collapse_ratio,
    delta,
    make_task_result,
    rank_models,
)
from .gridio import (
    read_array,
    read_grid,
    read_labels,
    write_array,
    write_grid,
    write_labels,
)
from .manifest import DatasetManifest, ImageEntry, load_manifest, save_manifest
from .metrics import (
    PlattParams,
    ace,
    amb_score,
    annotator_variance_map,
    auroc,
    correctness_map,
    dice,
    fit_platt,
    ged,
    majority_vote,
    ncc,
)
from .pipeline import ResultBundle, RunConfig, run_pipeline
from .reports import emit_reports, load_bundle, save_bundle
from .synthetic import (
    SyntheticDataset,
    SyntheticImage,
    SyntheticWorld,
    WorldConfig,
    generate_world,
    oracle_convergence_check,
    oracle_decompose,
    sample_dataset,
    sampling_error,
    write_dataset,
)

__all__ = [
    "AggregationStrategy",
    "DatasetManifest",
    "ImageEntry",
    "PlattParams",
    "ResultBundle",
    "RunConfig",
    "SampleGrid",
    "SyntheticDataset",
    "SyntheticImage",
    "SyntheticWorld",
    "TaskResult",
    "TaskSpec",
    "UncertaintyMaps",
    "WorldConfig",
    "ace",
    "aggregate_area_normalized",
    "aggregate_border_normalized",
    "aggregate_mean",
    "aggregate_patch_max",
    "aggregate_threshold",
    "amb_score",
    "annotator_variance_map",
    "apply_strategy",
    "assign_measures",
    "auroc",
    "bma",
    "border_length",
    "collapse_ratio",
    "correctness_map",
    "decompose",
    "decompose_no_eu",
    "delta",
    "dice",
    "emit_reports",
    "fit_platt",
    "ged",
    "generate_world",
    "label_map",
    "load_bundle",
    "load_manifest",
    "majority_vote",
    "make_task_result",
    "ncc",
    "oracle_convergence_check",
    "oracle_decompose",
    "rank_models",
    "read_array",
    "read_grid",
    "read_labels",
    "run_pipeline",
    "sample_dataset",
    "sampling_error",
    "save_bundle",
    "save_manifest",
    "shannon_entropy",
    "write_array",
    "write_dataset",
    "write_grid",
    "write_labels",
]
