"""Run a model over images and write sample grids plus a dataset manifest.

Grids are float32 NPY tensors of shape [M][N][C][H][W]; the manifest is JSON.
Both match the evaluation engine's ingest schema byte for byte, which is the
entire integration boundary: the engine never links any ML runtime, and the
exporter never links the engine.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .errors import LabelRangeError, ModelOutputShapeError, SimplexViolationError
from .spec import ExportSpec, ImageSpec

SIMPLEX_ATOL = 1e-4   # off-simplex up to this is renormalized, beyond rejected
VALUE_LOW = -1e-6     # entries below look like logits, not probabilities
VALUE_HIGH = 1.0 + 1e-4

MANIFEST_SCHEMA_VERSION = 1


def validate_probabilities(output, class_count: int, context: str) -> np.ndarray:
    """Check one model output and return it renormalized in float64."""
    arr = np.asarray(output, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != class_count:
        raise ModelOutputShapeError(
            f"{context}: expected [C={class_count}][H][W] probabilities, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ModelOutputShapeError(f"{context}: output contains NaN or infinite values")
    if arr.min() < VALUE_LOW or arr.max() > VALUE_HIGH:
        raise ModelOutputShapeError(
            f"{context}: values in [{arr.min():.3g}, {arr.max():.3g}] are not probabilities; "
            "if the model emits logits, wrap it with a softmax"
        )
    arr = np.clip(arr, 0.0, None)
    sums = arr.sum(axis=0, keepdims=True)
    worst = float(np.abs(sums - 1.0).max())
    if worst > SIMPLEX_ATOL:
        raise SimplexViolationError(
            f"{context}: class probabilities sum to 1 {worst:.3g} off (tolerance {SIMPLEX_ATOL:g})"
        )
    return arr / sums


def load_image(path) -> np.ndarray:
    return np.load(Path(path), allow_pickle=False)


def predict_grid(spec: ExportSpec, predictor, image_spec: ImageSpec) -> np.ndarray:
    """Stack predictor outputs into a float64 [M][N][C][H][W] grid."""
    image = load_image(image_spec.path)
    outputs = []
    shape = None
    for m in range(spec.instances):
        for n in range(spec.samples):
            context = f"image {image_spec.image_id!r}, instance {m}, sample {n}"
            arr = validate_probabilities(predictor(image, m, n), spec.class_count, context)
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise ModelOutputShapeError(
                    f"{context}: output shape {arr.shape} differs from first sample {shape}"
                )
            outputs.append(arr)
    return np.stack(outputs).reshape(spec.instances, spec.samples, *shape)


def export_annotations(image_spec: ImageSpec, class_count: int, height: int, width: int,
                       out_dir: Path) -> list:
    """Copy per-annotator label maps into the output tree as integer NPY files."""
    if len(image_spec.annotation_paths) == 1:
        warnings.warn(
            f"image {image_spec.image_id!r} has a single annotation; "
            "ambiguity scoring needs at least two",
            stacklevel=2,
        )
    written = []
    for r, src in enumerate(image_spec.annotation_paths):
        labels = np.load(Path(src), allow_pickle=False)
        if labels.ndim != 2 or not np.issubdtype(labels.dtype, np.integer):
            raise LabelRangeError(
                f"image {image_spec.image_id!r} annotation {r}: expected integer [H][W] map"
            )
        if labels.shape != (height, width):
            raise LabelRangeError(
                f"image {image_spec.image_id!r} annotation {r}: "
                f"shape {labels.shape} does not match grid {height}x{width}"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= class_count):
            raise LabelRangeError(
                f"image {image_spec.image_id!r} annotation {r}: "
                f"labels must lie in [0, {class_count})"
            )
        path = out_dir / "annotations" / f"{image_spec.image_id}_r{r}.npy"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.save(fh, labels)
        written.append(path)
    return written


def export_predictions(spec: ExportSpec) -> Path:
    """Export every image's grid and annotations; returns the manifest path.

    Deterministic given the model's own seeding: the exporter only supplies
    (instance, sample) indices.
    """
    spec.validate()
    predictor = spec.build_predictor()
    out_dir = Path(spec.output_dir)
    entries = []
    for image_spec in sorted(spec.images, key=lambda im: im.image_id):
        grid = predict_grid(spec, predictor, image_spec)
        grid_path = out_dir / "grids" / f"{image_spec.image_id}.npy"
        grid_path.parent.mkdir(parents=True, exist_ok=True)
        with open(grid_path, "wb") as fh:
            np.save(fh, grid.astype(np.float32))
        height, width = grid.shape[3], grid.shape[4]
        ann_paths = export_annotations(image_spec, spec.class_count, height, width, out_dir)
        entries.append({
            "image_id": image_spec.image_id,
            "split": image_spec.split,
            "role": image_spec.role,
            "grid_path": grid_path.relative_to(out_dir).as_posix(),
            "annotation_paths": [p.relative_to(out_dir).as_posix() for p in ann_paths],
        })
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "dataset_name": spec.dataset_name,
        "class_count": spec.class_count,
        "background_class": spec.background_class,
        "seed_tag": f"seed{spec.seed}",
        "images": entries,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
