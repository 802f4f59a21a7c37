"""End-to-end evaluation: manifest in, per-task scores and entanglement out.

For every test image the sample grid is decomposed into uncertainty maps,
which are then consumed by the downstream tasks:

* shift detection: maps are aggregated to one scalar per image and scored by
  AUROC per shift tag (in-distribution vs that tag), means taken across tags;
* ambiguity: per-image correlation between each map and the annotator
  variance map, averaged within each split;
* calibration: logistic confidence parameters are fitted per measure on
  validation-role in-distribution pixels, then scored by average calibration
  error on the test pixels of each split.

Shifted splits with several tags are scored per tag and mean-aggregated.

Everything is deterministic given (manifest, config): per-image work runs in
a bounded thread pool, reductions merge in sorted image-id order, and all
subsampling derives from counter-based streams keyed by the run seed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregation import AggregationStrategy, apply_strategy, label_map
from .decomposition import SampleGrid, UncertaintyMaps, bma, decompose, decompose_no_eu
from .entanglement import assign_measures, collapse_ratio, make_task_result
from .errors import (
    BadConfigError,
    EmptyInputError,
    EmptySplitError,
    PipelineStageError,
    ShapeError,
    UqtangleError,
)
from .gridio import read_grid, read_labels
from .manifest import DatasetManifest
from .metrics import (
    MEASURES,
    ace,
    annotator_variance_map,
    auroc,
    correctness_map,
    dice,
    fit_platt,
    ged,
    majority_vote,
    ncc,
)
from .rng import STREAM_PIXEL_POOL, philox_stream

KNOWN_TASKS = ("oodd", "amb", "cal", "seg")
WORKERS_ENV_VAR = "UQTANGLE_WORKERS"
THRESHOLD_PERCENTILE = 95.0


@dataclass(frozen=True)
class RunConfig:
    """Evaluation settings; flags mirror the command line one-to-one.

    `eu_instances` and `au_samples` cap how many instances/samples of each
    grid are used (grids holding fewer simply use all of them). A threshold
    aggregation strategy without an explicit tau is calibrated to the 95th
    percentile of pooled validation pixel uncertainties, per measure.
    """

    model_id: str = "model"
    tasks: tuple = ("oodd", "amb", "cal")
    aggregation: AggregationStrategy = field(default_factory=AggregationStrategy)
    eu_instances: int = 10
    au_samples: int = 10
    ace_bins: int = 20
    ace_per_image: bool = False
    cal_wrong_measure: str = "au"
    platt_subsample_cap: int = 2_000_000
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.eu_instances < 1 or self.au_samples < 1:
            raise BadConfigError("eu_instances and au_samples must be >= 1")
        if self.ace_bins < 1:
            raise BadConfigError(f"ace_bins must be >= 1, got {self.ace_bins}")
        if self.platt_subsample_cap < 1:
            raise BadConfigError("platt_subsample_cap must be >= 1")
        unknown = set(self.tasks) - set(KNOWN_TASKS)
        if unknown:
            raise BadConfigError(f"unknown tasks {sorted(unknown)}, expected among {KNOWN_TASKS}")
        if self.cal_wrong_measure not in ("au", "eu"):
            raise BadConfigError(f"cal_wrong_measure must be 'au' or 'eu', got {self.cal_wrong_measure!r}")


@dataclass(frozen=True)
class CollapseStat:
    split: str
    eu_over_au: float  # +inf when the aleatoric mean is exactly zero


@dataclass(frozen=True)
class SegStat:
    split: str
    dice: float
    ged: float


@dataclass
class ResultBundle:
    """Everything one evaluation run produced, ready for report emission."""

    model_id: str
    dataset_name: str
    seed_tag: str
    class_count: int
    config: RunConfig
    task_results: list
    collapse: list
    segmentation: list
    platt: dict
    thresholds: dict
    no_eu: bool


@dataclass
class _ImageRecord:
    image_id: str
    split: str
    ood_tag: str | None
    no_eu: bool
    mean_au: float
    mean_eu: float
    mean_tu: float
    agg: dict
    ncc: dict
    pool_u: dict
    pool_correct: np.ndarray
    dice: float | None
    ged: float | None
    maps: UncertaintyMaps


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    return max(1, int(env)) if env else 1


def decompose_entry(entry, config: RunConfig):
    """Load, truncate and decompose one manifest entry's grid.

    Returns (grid, maps, no_eu). Single-instance grids with several samples
    are routed through the sample-axis reinterpretation; a 1x1 grid is a
    deterministic prediction and is rejected.
    """
    grid = read_grid(entry.grid_path)
    sub = grid.probs[: config.eu_instances, : config.au_samples]
    if sub.shape != grid.probs.shape:
        grid = SampleGrid(sub)
    if grid.instances == 1 and grid.samples == 1:
        raise ShapeError(
            f"{entry.image_id}: M=1, N=1 grid is a deterministic prediction and cannot be decomposed"
        )
    if grid.instances == 1:
        return grid, decompose_no_eu(grid), True
    return grid, decompose(grid), False


def _pool_indices(n_pixels: int, quota: int, seed: int, index: int) -> np.ndarray:
    if n_pixels <= quota:
        return np.arange(n_pixels)
    rng = philox_stream(seed, STREAM_PIXEL_POOL, index)
    return np.sort(rng.choice(n_pixels, size=quota, replace=False))


def _stage(stage: str, image_id: str, fn, *args):
    try:
        return fn(*args)
    except PipelineStageError:
        raise
    except UqtangleError as exc:
        raise PipelineStageError(stage, image_id, exc) from exc


def _load_annotations(entry, class_count: int) -> np.ndarray:
    if not entry.annotation_paths:
        raise EmptyInputError(f"{entry.image_id}: no annotation files listed")
    return np.stack([read_labels(p, class_count) for p in entry.annotation_paths])


def _process_image(entry, index: int, config: RunConfig, class_count: int,
                   taus: dict, quota: int, want) -> _ImageRecord:
    grid, maps, no_eu = _stage("decompose", entry.image_id, decompose_entry, entry, config)
    mean_probs = bma(grid)
    labels = label_map(mean_probs)
    annotations = None
    if {"amb", "cal", "seg"} & set(want):
        annotations = _stage("annotations", entry.image_id, _load_annotations, entry, class_count)
    measure_maps = {"au": maps.au, "eu": maps.eu, "tu": maps.tu}

    agg_scores = {}
    if "oodd" in want:
        for m in MEASURES:
            agg_scores[m] = _stage(
                "aggregate", entry.image_id, apply_strategy,
                config.aggregation, measure_maps[m], labels, taus.get(m),
            )

    ncc_scores = {}
    if "amb" in want:
        if annotations.shape[0] < 2:
            raise PipelineStageError(
                "ambiguity", entry.image_id,
                EmptyInputError(f"{annotations.shape[0]} annotation(s); ambiguity scoring needs >= 2"),
            )
        variance = annotator_variance_map(annotations, class_count)
        for m in MEASURES:
            ncc_scores[m] = _stage("ambiguity", entry.image_id, ncc, variance, measure_maps[m])

    pool_u: dict = {}
    pool_correct = np.empty(0)
    if "cal" in want:
        correct = _stage("correctness", entry.image_id, correctness_map,
                         mean_probs, annotations, class_count)
        idx = _pool_indices(maps.au.size, quota, config.seed, index)
        pool_u = {m: measure_maps[m].ravel()[idx] for m in MEASURES}
        pool_correct = correct.ravel()[idx].astype(np.float64)

    dice_score = ged_score = None
    if "seg" in want:
        reference = majority_vote(annotations, class_count)
        dice_score = _stage("segmentation", entry.image_id, dice, labels, reference, class_count)
        flat = grid.probs.reshape(-1, *grid.probs.shape[2:])
        sample_masks = [s.argmax(axis=0) for s in flat]
        ged_score = _stage("segmentation", entry.image_id, ged,
                           sample_masks, list(annotations), class_count)

    return _ImageRecord(
        image_id=entry.image_id,
        split=entry.split,
        ood_tag=entry.ood_tag,
        no_eu=no_eu,
        mean_au=float(maps.au.mean()),
        mean_eu=float(maps.eu.mean()),
        mean_tu=float(maps.tu.mean()),
        agg=agg_scores,
        ncc=ncc_scores,
        pool_u=pool_u,
        pool_correct=pool_correct,
        dice=dice_score,
        ged=ged_score,
        maps=maps,
    )


def _process_val_image(entry, index: int, config: RunConfig, class_count: int,
                       quota: int, need_correct: bool):
    grid, maps, _ = _stage("decompose", entry.image_id, decompose_entry, entry, config)
    idx = _pool_indices(maps.au.size, quota, config.seed, index)
    pools = {m: getattr(maps, m).ravel()[idx] for m in MEASURES}
    if not need_correct:  # threshold calibration needs only the uncertainties
        return entry.image_id, pools, np.empty(0)
    annotations = _stage("annotations", entry.image_id, _load_annotations, entry, class_count)
    correct = _stage("correctness", entry.image_id, correctness_map,
                     bma(grid), annotations, class_count)
    return entry.image_id, pools, correct.ravel()[idx].astype(np.float64)


def _mean(values) -> float:
    values = list(values)
    return float(sum(values) / len(values))


def run_pipeline(manifest: DatasetManifest, config: RunConfig) -> ResultBundle:
    """Evaluate one model's exported dataset on the configured tasks."""
    want = tuple(t for t in KNOWN_TASKS if t in config.tasks)
    test_entries = manifest.select(role="test")
    if not test_entries:
        raise EmptySplitError("manifest has no test-role images")
    id_test = [e for e in test_entries if e.split == "id"]
    tags = sorted({e.ood_tag for e in test_entries if e.is_ood})
    if not id_test:
        raise EmptySplitError("manifest has no in-distribution test images")
    if "oodd" in want and not tags:
        raise EmptySplitError("shift-detection task needs at least one ood:<tag> test split")

    workers = resolve_workers(config.workers)
    # Stable per-image stream indices: position in the id-sorted global list.
    ordered = sorted(manifest.images, key=lambda e: e.image_id)
    stream_index = {e.image_id: i for i, e in enumerate(ordered)}

    # Validation pass: confidence calibration and threshold calibration data.
    taus: dict = {}
    platt: dict = {}
    needs_val = "cal" in want or (
        config.aggregation.kind == "threshold" and config.aggregation.tau is None and "oodd" in want
    )
    if needs_val:
        val_entries = [e for e in manifest.select(role="val") if e.split == "id"]
        if not val_entries:
            raise EmptySplitError(
                "calibration of confidences/thresholds needs validation-role in-distribution images"
            )
        quota = max(1, math.ceil(config.platt_subsample_cap / len(val_entries)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            val_out = list(pool.map(
                lambda e: _process_val_image(e, stream_index[e.image_id], config,
                                             manifest.class_count, quota,
                                             need_correct="cal" in want),
                sorted(val_entries, key=lambda e: e.image_id),
            ))
        val_out.sort(key=lambda item: item[0])
        val_u = {m: np.concatenate([pools[m] for _, pools, _ in val_out]) for m in MEASURES}
        val_correct = np.concatenate([c for _, _, c in val_out])
        if config.aggregation.kind == "threshold" and config.aggregation.tau is None:
            taus = {m: float(np.percentile(val_u[m], THRESHOLD_PERCENTILE)) for m in MEASURES}
        if "cal" in want:
            platt = {m: fit_platt(val_u[m], val_correct, measure=m) for m in MEASURES}

    # Test pass.
    quota = max(1, math.ceil(config.platt_subsample_cap / len(test_entries)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(
            lambda e: _process_image(e, stream_index[e.image_id], config,
                                     manifest.class_count, taus, quota, want),
            sorted(test_entries, key=lambda e: e.image_id),
        ))
    records.sort(key=lambda r: r.image_id)
    by_split: dict = {"id": [r for r in records if r.split == "id"]}
    for tag in tags:
        by_split[f"ood:{tag}"] = [r for r in records if r.ood_tag == tag]

    results: list = []

    if "oodd" in want:
        spec = assign_measures("oodd")
        scores = {}
        for m in MEASURES:
            id_scores = [r.agg[m] for r in by_split["id"]]
            per_tag = [
                auroc(id_scores, [r.agg[m] for r in by_split[f"ood:{tag}"]])
                for tag in tags
            ]
            scores[m] = _mean(per_tag)
        results.append(make_task_result(config.model_id, spec, "all", scores))

    if "amb" in want:
        spec = assign_measures("amb")
        id_scores = {m: _mean(r.ncc[m] for r in by_split["id"]) for m in MEASURES}
        results.append(make_task_result(config.model_id, spec, "id", id_scores))
        if tags:
            ood_scores = {
                m: _mean(_mean(r.ncc[m] for r in by_split[f"ood:{tag}"]) for tag in tags)
                for m in MEASURES
            }
            results.append(make_task_result(config.model_id, spec, "ood", ood_scores))

    if "cal" in want:
        spec = assign_measures("cal", cal_wrong_measure=config.cal_wrong_measure)

        def split_ace(split_records, measure):
            params = platt[measure]
            if config.ace_per_image:
                return _mean(
                    ace(params.confidence(r.pool_u[measure]), r.pool_correct, config.ace_bins)
                    for r in split_records
                )
            u = np.concatenate([r.pool_u[measure] for r in split_records])
            correct = np.concatenate([r.pool_correct for r in split_records])
            return ace(params.confidence(u), correct, config.ace_bins)

        id_scores = {m: split_ace(by_split["id"], m) for m in MEASURES}
        results.append(make_task_result(config.model_id, spec, "id", id_scores))
        if tags:
            ood_scores = {
                m: _mean(split_ace(by_split[f"ood:{tag}"], m) for tag in tags)
                for m in MEASURES
            }
            results.append(make_task_result(config.model_id, spec, "ood", ood_scores))

    collapse = [CollapseStat("id", collapse_ratio([r.maps for r in by_split["id"]]))]
    for tag in tags:
        collapse.append(
            CollapseStat(f"ood:{tag}", collapse_ratio([r.maps for r in by_split[f"ood:{tag}"]]))
        )
    if tags:
        tag_ratios = [c.eu_over_au for c in collapse[1:]]
        collapse.append(CollapseStat("ood", _mean(tag_ratios)))

    segmentation: list = []
    if "seg" in want:
        segmentation.append(SegStat(
            "id",
            _mean(r.dice for r in by_split["id"]),
            _mean(r.ged for r in by_split["id"]),
        ))
        if tags:
            segmentation.append(SegStat(
                "ood",
                _mean(_mean(r.dice for r in by_split[f"ood:{tag}"]) for tag in tags),
                _mean(_mean(r.ged for r in by_split[f"ood:{tag}"]) for tag in tags),
            ))

    return ResultBundle(
        model_id=config.model_id,
        dataset_name=manifest.dataset_name,
        seed_tag=manifest.seed_tag,
        class_count=manifest.class_count,
        config=config,
        task_results=results,
        collapse=collapse,
        segmentation=segmentation,
        platt=platt,
        thresholds=taus,
        no_eu=all(r.no_eu for r in records),
    )
