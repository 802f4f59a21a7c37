"""Toy segmentation worlds with analytically known uncertainty structure.

A world holds a per-pixel categorical ground-truth field (the aleatoric
component, built from smooth random blobs) and K model instances whose
predictive fields are logit-space Gaussian perturbations of that field (the
epistemic component). Because every distribution is known in closed form, the
exact uncertainty maps are available without sampling and the whole evaluation
pipeline can be verified end to end at desk scale.

Distribution-shifted images are emulated by adding an independent random logit
offset per model instance, which inflates inter-instance disagreement (and so
the epistemic signal) while leaving the ground-truth field untouched.

All randomness comes from the counter-based Philox engine keyed by
(seed, stream kind, image index), so generation is reproducible and identical
regardless of worker count or evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .decomposition import SampleGrid, UncertaintyMaps, decompose, shannon_entropy
from .errors import BadConfigError
from .gridio import write_array, write_grid
from .manifest import DatasetManifest, ImageEntry, save_manifest
from .rng import (
    STREAM_ANNOTATIONS,
    STREAM_OOD,
    STREAM_SAMPLES,
    STREAM_WORLD,
    philox_stream,
)

SAMPLE_MODES = ("categorical", "soft", "softmax")


def _softmax(logits: np.ndarray, axis: int) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class WorldConfig:
    classes: int = 2
    height: int = 16
    width: int = 16
    instances: int = 10
    perturbation_scale: float = 0.3
    ood_shift: float = 0.0
    seed: int = 0
    waves: int = 8           # random cosines summed per class field
    temperature: float = 1.0  # divides the blob logits before the softmax

    def validate(self):
        if self.classes < 2:
            raise BadConfigError(f"classes must be >= 2, got {self.classes}")
        if self.height < 1 or self.width < 1:
            raise BadConfigError(f"grid size must be positive, got {self.height}x{self.width}")
        if self.instances < 1:
            raise BadConfigError(f"instances must be >= 1, got {self.instances}")
        if self.perturbation_scale < 0:
            raise BadConfigError(f"perturbation_scale must be >= 0, got {self.perturbation_scale}")
        if self.ood_shift < 0:
            raise BadConfigError(f"ood_shift must be >= 0, got {self.ood_shift}")
        if self.waves < 1:
            raise BadConfigError(f"waves must be >= 1, got {self.waves}")
        if self.temperature <= 0:
            raise BadConfigError(f"temperature must be > 0, got {self.temperature}")


@dataclass(frozen=True)
class SyntheticWorld:
    """Ground-truth field plus the family of perturbed model instances."""

    config: WorldConfig
    annotator_dist: np.ndarray    # [C][H][W] true per-pixel categorical parameters
    annotator_logits: np.ndarray  # [C][H][W] blob logits behind annotator_dist
    instance_logits: np.ndarray   # [K][C][H][W]
    instance_fields: np.ndarray   # [K][C][H][W] softmax of instance_logits


@dataclass(frozen=True)
class SyntheticImage:
    image_id: str
    split: str   # "id" or "ood:<tag>"
    role: str    # "val" or "test"
    fields: np.ndarray       # [K][C][H][W] exact predictive fields for this image
    grid: SampleGrid
    annotations: np.ndarray  # [R][H][W]


@dataclass(frozen=True)
class SyntheticDataset:
    world: SyntheticWorld
    images: tuple
    mode: str
    annotators: int
    au_samples: int


def generate_world(config: WorldConfig) -> SyntheticWorld:
    """Build a world deterministically from its config.

    Per class, the blob logits are a sum of `waves` cosines with random
    frequency, phase and amplitude, scaled by 1/sqrt(waves) and divided by the
    temperature; the softmax over classes gives the ground-truth field.
    Instance logits add iid Gaussian noise of `perturbation_scale`, so a zero
    scale makes every instance identical to the truth.
    """
    config.validate()
    rng = philox_stream(config.seed, STREAM_WORLD)
    c, h, w = config.classes, config.height, config.width
    rows = np.arange(h)[:, None] / h
    cols = np.arange(w)[None, :] / w
    logits = np.zeros((c, h, w))
    for ci in range(c):
        field = np.zeros((h, w))
        for _ in range(config.waves):
            fy, fx = rng.uniform(0.25, 2.5, size=2)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amplitude = rng.uniform(0.5, 1.5)
            field += amplitude * np.cos(2.0 * np.pi * (fy * rows + fx * cols) + phase)
        logits[ci] = field / np.sqrt(config.waves)
    logits /= config.temperature
    annotator_dist = _softmax(logits, axis=0)
    noise = rng.normal(0.0, 1.0, size=(config.instances, c, h, w)) * config.perturbation_scale
    instance_logits = logits[None] + noise
    return SyntheticWorld(
        config=config,
        annotator_dist=annotator_dist,
        annotator_logits=logits,
        instance_logits=instance_logits,
        instance_fields=_softmax(instance_logits, axis=1),
    )


def _sample_categorical(dist: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF categorical draw; `dist` is [..., C, H, W], `u` uniform in [0,1)."""
    cdf = np.cumsum(dist, axis=-3)
    cdf[..., -1, :, :] = 1.0
    return (u > cdf).sum(axis=-3)


def _image_fields(world: SyntheticWorld, index: int, ood: bool) -> np.ndarray:
    if not ood:
        return world.instance_fields
    rng = philox_stream(world.config.seed, STREAM_OOD, index)
    k, c = world.config.instances, world.config.classes
    offsets = rng.normal(0.0, 1.0, size=(k, c, 1, 1)) * world.config.ood_shift
    return _softmax(world.instance_logits + offsets, axis=1)


def _build_grid(world, fields, index: int, au_samples: int, mode: str,
                soft_logit_scale: float) -> SampleGrid:
    k, c = fields.shape[0], fields.shape[1]
    h, w = fields.shape[2], fields.shape[3]
    if mode == "softmax":
        return SampleGrid(fields[:, None, :, :, :].copy())
    rng = philox_stream(world.config.seed, STREAM_SAMPLES, index)
    if mode == "categorical":
        u = rng.random((k, au_samples, 1, h, w))
        labels = _sample_categorical(fields[:, None], u)  # [K][N][H][W]
        onehot = labels[:, :, None, :, :] == np.arange(c)[None, None, :, None, None]
        return SampleGrid(onehot.astype(np.float64))
    # soft mode: per-sample logit jitter around the instance field
    with np.errstate(divide="ignore"):
        base = np.log(np.maximum(fields, 1e-12))
    noise = rng.normal(0.0, 1.0, size=(k, au_samples, c, h, w)) * soft_logit_scale
    return SampleGrid(_softmax(base[:, None] + noise, axis=2))


def sample_dataset(world: SyntheticWorld, images: int, annotators: int, au_samples: int,
                   *, val_images: int = 0, ood_fraction: float = 0.5,
                   mode: str = "categorical", ood_tag: str = "shift",
                   soft_logit_scale: float = 0.5) -> SyntheticDataset:
    """Draw a dataset of images, annotations and sample grids from a world.

    `val_images` in-distribution validation images come first, then `images`
    test images of which the last round(images * ood_fraction) are shifted.
    In "softmax" mode each instance contributes its field directly as a single
    sample (N = 1); "categorical" draws one-hot class samples per pixel;
    "soft" draws probability samples by jittering instance logits.
    """
    if images < 1 or annotators < 1 or au_samples < 1:
        raise BadConfigError("images, annotators and au_samples must all be >= 1")
    if val_images < 0:
        raise BadConfigError(f"val_images must be >= 0, got {val_images}")
    if not 0.0 <= ood_fraction <= 1.0:
        raise BadConfigError(f"ood_fraction must lie in [0, 1], got {ood_fraction}")
    if mode not in SAMPLE_MODES:
        raise BadConfigError(f"mode must be one of {SAMPLE_MODES}, got {mode!r}")

    n_ood = int(round(images * ood_fraction))
    if world.config.ood_shift == 0.0 and n_ood:
        # A zero shift makes "ood" images statistically identical to "id" ones;
        # that is intentional for null-signal checks, so no error here.
        pass
    out = []
    total = val_images + images
    width = max(4, len(str(total)))
    for index in range(total):
        if index < val_images:
            role, ood = "val", False
        else:
            role = "test"
            ood = (index - val_images) >= images - n_ood
        split = f"ood:{ood_tag}" if ood else "id"
        fields = _image_fields(world, index, ood)
        rng_ann = philox_stream(world.config.seed, STREAM_ANNOTATIONS, index)
        u = rng_ann.random((annotators, 1, *world.annotator_dist.shape[1:]))
        annotations = _sample_categorical(world.annotator_dist[None], u).astype(np.int64)
        grid = _build_grid(world, fields, index, au_samples, mode, soft_logit_scale)
        out.append(
            SyntheticImage(
                image_id=f"img_{index:0{width}d}",
                split=split,
                role=role,
                fields=fields,
                grid=grid,
                annotations=annotations,
            )
        )
    return SyntheticDataset(
        world=world, images=tuple(out), mode=mode,
        annotators=annotators, au_samples=au_samples,
    )


def oracle_decompose(image: SyntheticImage) -> UncertaintyMaps:
    """Exact uncertainty maps from the image's known predictive fields.

    No sampling: aleatoric is the mean instance entropy, total the entropy of
    the mean field, epistemic their (clamped) difference.
    """
    au = shannon_entropy(image.fields, axis=1).mean(axis=0)
    tu = shannon_entropy(image.fields.mean(axis=0), axis=0)
    return UncertaintyMaps(au=au, eu=np.maximum(tu - au, 0.0), tu=tu)


def sampling_error(dataset: SyntheticDataset) -> float:
    """Mean absolute deviation between sampled and exact uncertainty maps.

    Averaged over pixels, the three measures and all images in the dataset.
    """
    errors = []
    for image in dataset.images:
        sampled = decompose(image.grid)
        exact = oracle_decompose(image)
        errors.append(np.mean([
            np.abs(sampled.au - exact.au).mean(),
            np.abs(sampled.eu - exact.eu).mean(),
            np.abs(sampled.tu - exact.tu).mean(),
        ]))
    return float(np.mean(errors))


def oracle_convergence_check(world: SyntheticWorld, sample_counts, *, images: int = 8,
                             mode: str = "categorical") -> list:
    """Sampling error of the decomposition for each sample count.

    Returns (n, mean absolute error) pairs; in categorical mode the error
    shrinks as the per-instance sample count grows, and in softmax mode it is
    exactly zero because the grid holds the fields themselves.
    """
    curve = []
    for n in sample_counts:
        dataset = sample_dataset(
            world, images=images, annotators=1, au_samples=int(n),
            val_images=0, ood_fraction=0.0, mode=mode,
        )
        curve.append((int(n), sampling_error(dataset)))
    return curve


def write_dataset(dataset: SyntheticDataset, out_dir, *, dataset_name: str | None = None,
                  grid_dtype=np.float32) -> Path:
    """Write grids, annotations and a manifest in the pipeline's ingest format.

    Returns the manifest path; the written tree is byte-compatible with what
    the evaluation pipeline consumes, so synthetic runs exercise the full
    on-disk path.
    """
    out_dir = Path(out_dir)
    config = dataset.world.config
    if dataset_name is None:
        dataset_name = f"synthetic-c{config.classes}-{config.height}x{config.width}"
    entries = []
    for image in dataset.images:
        grid_path = out_dir / "grids" / f"{image.image_id}.npy"
        write_grid(image.grid, grid_path, dtype=grid_dtype)
        ann_paths = []
        for r in range(image.annotations.shape[0]):
            ann_path = out_dir / "annotations" / f"{image.image_id}_r{r}.npy"
            write_array(image.annotations[r], ann_path)
            ann_paths.append(ann_path)
        entries.append(
            ImageEntry(
                image_id=image.image_id,
                split=image.split,
                role=image.role,
                grid_path=grid_path,
                annotation_paths=tuple(ann_paths),
            )
        )
    manifest = DatasetManifest(
        dataset_name=dataset_name,
        class_count=config.classes,
        background_class=0,
        seed_tag=f"seed{config.seed}",
        images=tuple(entries),
        root=out_dir,
    )
    return save_manifest(manifest, out_dir / "manifest.json")


def make_world(seed: int = 0, **overrides) -> SyntheticWorld:
    """Convenience wrapper: generate_world(WorldConfig(seed=seed, **overrides))."""
    return generate_world(replace(WorldConfig(seed=seed), **overrides))
