"""Dataset manifests: a declarative JSON listing of images, splits and files.

A manifest names every image of a dataset together with its split tag
("id" or "ood:<tag>"), its pipeline role (train/val/test), the sample-grid
file and the per-annotator label files. Paths are stored relative to the
manifest; loading resolves and validates everything up front and reports all
violations at once rather than the first one found.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    InconsistentClassCountError,
    InconsistentManifestError,
    ManifestParseError,
    ManifestValidationError,
    MissingFileError,
)
from .gridio import peek_npy_header

SCHEMA_VERSION = 1
ROLES = ("train", "val", "test")

_TOP_KEYS = {
    "schema_version",
    "dataset_name",
    "class_count",
    "background_class",
    "seed_tag",
    "images",
}
_IMAGE_KEYS = {"image_id", "split", "role", "grid_path", "annotation_paths"}


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    split: str
    role: str
    grid_path: Path
    annotation_paths: tuple

    @property
    def is_ood(self) -> bool:
        return self.split.startswith("ood:")

    @property
    def ood_tag(self) -> str | None:
        return self.split.split(":", 1)[1] if self.is_ood else None


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    class_count: int
    background_class: int
    seed_tag: str
    images: tuple
    root: Path

    def select(self, role: str | None = None, split: str | None = None):
        """Images filtered by role and/or split ('ood' matches any tag)."""
        out = []
        for e in self.images:
            if role is not None and e.role != role:
                continue
            if split is not None:
                if split == "ood" and not e.is_ood:
                    continue
                if split != "ood" and e.split != split:
                    continue
            out.append(e)
        return out

    def ood_tags(self):
        return sorted({e.ood_tag for e in self.images if e.is_ood})


def _valid_split(split: str) -> bool:
    if split == "id":
        return True
    return split.startswith("ood:") and len(split) > 4


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Parse and fully validate a manifest file.

    Schema violations (wrong types, unknown keys) raise ``ManifestParseError``
    immediately; content violations (duplicate ids, missing files, class-count
    mismatches) are collected exhaustively and raised together.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc

    if not isinstance(raw, dict):
        raise ManifestParseError(f"{path}: manifest must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ManifestParseError(f"{path}: unknown keys {sorted(unknown)}")
    missing_keys = _TOP_KEYS - set(raw)
    if missing_keys:
        raise ManifestParseError(f"{path}: missing keys {sorted(missing_keys)}")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ManifestParseError(
            f"{path}: schema_version {raw['schema_version']!r} not supported (expected {SCHEMA_VERSION})"
        )
    class_count = raw["class_count"]
    if not isinstance(class_count, int) or class_count < 2:
        raise ManifestParseError(f"{path}: class_count must be an integer >= 2")
    background = raw["background_class"]
    if not isinstance(background, int) or not 0 <= background < class_count:
        raise ManifestParseError(f"{path}: background_class must lie in [0, {class_count})")
    if not isinstance(raw["images"], list) or not raw["images"]:
        raise ManifestParseError(f"{path}: images must be a nonempty list")

    root = path.parent
    violations = []
    seen_ids = set()
    entries = []
    for i, item in enumerate(raw["images"]):
        if not isinstance(item, dict):
            raise ManifestParseError(f"{path}: images[{i}] must be an object")
        unknown = set(item) - _IMAGE_KEYS
        if unknown:
            raise ManifestParseError(f"{path}: images[{i}] unknown keys {sorted(unknown)}")
        missing_keys = _IMAGE_KEYS - set(item)
        if missing_keys:
            raise ManifestParseError(f"{path}: images[{i}] missing keys {sorted(missing_keys)}")
        image_id = item["image_id"]
        if image_id in seen_ids:
            violations.append(("duplicate", f"duplicate image_id {image_id!r}"))
        seen_ids.add(image_id)
        if not _valid_split(item["split"]):
            violations.append(
                ("split", f"image {image_id!r}: split must be 'id' or 'ood:<tag>', got {item['split']!r}")
            )
        if item["role"] not in ROLES:
            violations.append(
                ("split", f"image {image_id!r}: role must be one of {ROLES}, got {item['role']!r}")
            )
        grid_path = root / item["grid_path"]
        ann_paths = tuple(root / p for p in item["annotation_paths"])
        if check_files:
            for p in (grid_path, *ann_paths):
                if not p.is_file():
                    violations.append(("missing", f"image {image_id!r}: file not found: {p}"))
            if grid_path.is_file():
                try:
                    shape, _ = peek_npy_header(grid_path)
                except Exception as exc:
                    violations.append(("missing", f"image {image_id!r}: {exc}"))
                else:
                    if len(shape) != 5:
                        violations.append(
                            ("classes", f"image {image_id!r}: grid {grid_path} has rank {len(shape)}, expected 5")
                        )
                    elif shape[2] != class_count:
                        violations.append(
                            ("classes",
                             f"image {image_id!r}: grid {grid_path} has {shape[2]} classes, manifest says {class_count}")
                        )
        entries.append(
            ImageEntry(
                image_id=image_id,
                split=item["split"],
                role=item["role"],
                grid_path=grid_path,
                annotation_paths=ann_paths,
            )
        )

    if violations:
        kinds = {k for k, _ in violations}
        messages = [m for _, m in violations]
        if kinds == {"missing"}:
            raise MissingFileError(messages)
        if kinds == {"classes"}:
            raise InconsistentClassCountError(messages)
        if kinds <= {"duplicate", "split"}:
            raise InconsistentManifestError(messages)
        raise ManifestValidationError(messages)

    entries.sort(key=lambda e: e.image_id)
    return DatasetManifest(
        dataset_name=raw["dataset_name"],
        class_count=class_count,
        background_class=background,
        seed_tag=raw["seed_tag"],
        images=tuple(entries),
        root=root,
    )


def save_manifest(manifest: DatasetManifest, path) -> Path:
    """Write a manifest as JSON with paths relative to the file location."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.parent

    def rel(p: Path) -> str:
        try:
            return p.relative_to(root).as_posix()
        except ValueError:
            return str(p)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "dataset_name": manifest.dataset_name,
        "class_count": manifest.class_count,
        "background_class": manifest.background_class,
        "seed_tag": manifest.seed_tag,
        "images": [
            {
                "image_id": e.image_id,
                "split": e.split,
                "role": e.role,
                "grid_path": rel(e.grid_path),
                "annotation_paths": [rel(p) for p in e.annotation_paths],
            }
            for e in manifest.images
        ],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
