"""Adapter from segmentation model ensembles to sample-grid NPY files.

Runs any user-supplied model (ensembles of checkpoints, dropout forward
passes, weight samples, or a single generative model) over a list of images
and writes the [M][N][C][H][W] probability grids, the per-annotator label
maps and a dataset manifest in the evaluation engine's ingest format.
"""

__version__ = "0.1.0"

from .errors import (
    ExportError,
    LabelRangeError,
    ModelOutputShapeError,
    SimplexViolationError,
    SpecError,
)
from .export import export_annotations, export_predictions, predict_grid, validate_probabilities
from .spec import EU_MODES, ExportSpec, ImageSpec, load_spec

__all__ = [
    "EU_MODES",
    "ExportError",
    "ExportSpec",
    "ImageSpec",
    "LabelRangeError",
    "ModelOutputShapeError",
    "SimplexViolationError",
    "SpecError",
    "export_annotations",
    "export_predictions",
    "load_spec",
    "predict_grid",
    "validate_probabilities",
]
