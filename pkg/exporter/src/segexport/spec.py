"""Export spec: what to run, how many instances/samples, where to write.

The spec is a JSON file.  `entry_point` names a factory as "module:attribute";
the factory is called with the spec and must return a predictor callable
`predictor(image, instance, sample) -> [C][H][W] class probabilities`. All
deep-learning framework specifics (checkpoint loading, dropout sampling,
weight draws, devices) live behind that callable; the exporter only indexes
the epistemic axis by `instance` and the generative axis by `sample`.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SpecError

EU_MODES = ("ensemble_checkpoints", "dropout_forward_passes", "weight_samples", "none")

SPEC_KEYS = {
    "schema_version", "dataset_name", "entry_point", "eu_mode", "instances",
    "samples", "class_count", "checkpoints", "device", "output_dir", "seed",
    "background_class", "images",
}
IMAGE_KEYS = {"image_id", "path", "split", "role", "annotation_paths"}


@dataclass(frozen=True)
class ImageSpec:
    image_id: str
    path: Path
    split: str
    role: str
    annotation_paths: tuple


@dataclass(frozen=True)
class ExportSpec:
    dataset_name: str
    entry_point: str
    eu_mode: str
    instances: int            # M: epistemic model instances
    samples: int              # N: generative samples per instance
    class_count: int
    output_dir: Path
    images: tuple
    checkpoints: tuple = ()
    device: str = "cpu"
    seed: int = 0
    background_class: int = 0
    root: Path = field(default=Path("."))

    def validate(self):
        if self.eu_mode not in EU_MODES:
            raise SpecError(f"eu_mode must be one of {EU_MODES}, got {self.eu_mode!r}")
        if self.instances < 1 or self.samples < 1:
            raise SpecError("instances and samples must be >= 1")
        if self.eu_mode == "none" and self.instances != 1:
            raise SpecError("eu_mode 'none' forces instances = 1")
        if self.eu_mode == "ensemble_checkpoints" and len(self.checkpoints) != self.instances:
            raise SpecError(
                f"ensemble mode needs one checkpoint per instance: "
                f"{len(self.checkpoints)} checkpoints for {self.instances} instances"
            )
        if self.class_count < 2:
            raise SpecError(f"class_count must be >= 2, got {self.class_count}")
        if not self.images:
            raise SpecError("spec lists no images")
        ids = [im.image_id for im in self.images]
        if len(set(ids)) != len(ids):
            raise SpecError("duplicate image_id in spec")

    def build_predictor(self):
        """Resolve the entry point and construct the model predictor."""
        module_name, _, attribute = self.entry_point.partition(":")
        if not module_name or not attribute:
            raise SpecError(f"entry_point must be 'module:attribute', got {self.entry_point!r}")
        try:
            module = importlib.import_module(module_name)
            factory = getattr(module, attribute)
        except (ImportError, AttributeError) as exc:
            raise SpecError(f"cannot resolve entry point {self.entry_point!r}: {exc}") from exc
        return factory(self)


def load_spec(path) -> ExportSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecError(f"{path}: spec must be a JSON object")
    unknown = set(raw) - SPEC_KEYS
    if unknown:
        raise SpecError(f"{path}: unknown keys {sorted(unknown)}")
    if raw.get("schema_version", 1) != 1:
        raise SpecError(f"{path}: unsupported schema_version {raw.get('schema_version')!r}")
    required = {"dataset_name", "entry_point", "eu_mode", "instances", "samples",
                "class_count", "output_dir", "images"}
    missing = required - set(raw)
    if missing:
        raise SpecError(f"{path}: missing keys {sorted(missing)}")

    root = path.parent
    images = []
    for i, item in enumerate(raw["images"]):
        unknown = set(item) - IMAGE_KEYS
        if unknown:
            raise SpecError(f"{path}: images[{i}] unknown keys {sorted(unknown)}")
        missing = IMAGE_KEYS - set(item)
        if missing:
            raise SpecError(f"{path}: images[{i}] missing keys {sorted(missing)}")
        images.append(ImageSpec(
            image_id=item["image_id"],
            path=root / item["path"],
            split=item["split"],
            role=item["role"],
            annotation_paths=tuple(root / p for p in item["annotation_paths"]),
        ))

    spec = ExportSpec(
        dataset_name=raw["dataset_name"],
        entry_point=raw["entry_point"],
        eu_mode=raw["eu_mode"],
        instances=int(raw["instances"]),
        samples=int(raw["samples"]),
        class_count=int(raw["class_count"]),
        output_dir=root / raw["output_dir"],
        images=tuple(images),
        checkpoints=tuple(str(root / c) for c in raw.get("checkpoints", [])),
        device=raw.get("device", "cpu"),
        seed=int(raw.get("seed", 0)),
        background_class=int(raw.get("background_class", 0)),
        root=root,
    )
    spec.validate()
    return spec
