"""Reduce a pixel-wise uncertainty map to one scalar per image.

Five strategies are supported: the image-wise mean, the maximum mean over a
sliding square patch, the fraction of pixels above a threshold, and sums
normalized by predicted foreground area or by predicted border length. The
normalized variants exist because plain means reward large segmentations with
high scores regardless of actual distribution shift.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BadConfigError, PatchTooLargeError, ShapeMismatchError

STRATEGY_KINDS = ("mean", "patch_max", "threshold", "area", "border")


def aggregate_mean(u) -> float:
    """Arithmetic mean over all pixels."""
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        raise ShapeMismatchError("uncertainty map is empty")
    return float(u.mean())


def aggregate_patch_max(u, patch_side: int) -> float:
    """Maximum mean over a stride-1 sliding square window of side `patch_side`.

    The sliding window (rather than disjoint tiles) keeps the score stable
    under one-pixel shifts of the uncertain region.
    """
    u = np.asarray(u, dtype=np.float64)
    if patch_side < 1:
        raise BadConfigError(f"patch_side must be >= 1, got {patch_side}")
    if patch_side > min(u.shape):
        raise PatchTooLargeError(
            f"patch {patch_side}x{patch_side} does not fit a {u.shape[0]}x{u.shape[1]} map"
        )
    windows = sliding_window_view(u, (patch_side, patch_side))
    return float(windows.mean(axis=(2, 3)).max())


def aggregate_threshold(u, tau: float) -> float:
    """Fraction of pixels with uncertainty strictly above `tau`."""
    u = np.asarray(u, dtype=np.float64)
    if tau < 0:
        raise BadConfigError(f"threshold must be >= 0 nats, got {tau}")
    if u.size == 0:
        raise ShapeMismatchError("uncertainty map is empty")
    return float(np.count_nonzero(u > tau) / u.size)


def aggregate_area_normalized(u, labels, background_class: int = 0) -> float:
    """Sum of uncertainty divided by predicted foreground area.

    Area counts pixels whose label differs from `background_class`; an
    all-background prediction divides by 1.
    """
    u = np.asarray(u, dtype=np.float64)
    labels = np.asarray(labels)
    if u.shape != labels.shape:
        raise ShapeMismatchError(f"map shape {u.shape} != label shape {labels.shape}")
    area = int(np.count_nonzero(labels != background_class))
    return float(u.sum() / max(area, 1))


def border_length(labels) -> int:
    """Count of 4-adjacent pixel pairs with differing labels."""
    labels = np.asarray(labels)
    vertical = np.count_nonzero(labels[1:, :] != labels[:-1, :])
    horizontal = np.count_nonzero(labels[:, 1:] != labels[:, :-1])
    return int(vertical + horizontal)


def aggregate_border_normalized(u, labels) -> float:
    """Sum of uncertainty divided by predicted border length (or 1 if borderless)."""
    u = np.asarray(u, dtype=np.float64)
    labels = np.asarray(labels)
    if u.shape != labels.shape:
        raise ShapeMismatchError(f"map shape {u.shape} != label shape {labels.shape}")
    return float(u.sum() / max(border_length(labels), 1))


def label_map(class_probs) -> np.ndarray:
    """Point prediction: argmax over the class axis of a [C][H][W] map.

    Ties resolve to the lowest class index.
    """
    return np.asarray(class_probs).argmax(axis=0)


@dataclass(frozen=True)
class AggregationStrategy:
    """Selected aggregation rule plus its parameters.

    `tau=None` on the threshold strategy means "calibrate from the validation
    split" (the pipeline fills in the 95th percentile of pooled validation
    pixel uncertainties, separately per measure).
    """

    kind: str = "border"
    patch_side: int = 10
    tau: float | None = None
    background_class: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise BadConfigError(f"unknown aggregation kind {self.kind!r}, expected one of {STRATEGY_KINDS}")
        if self.patch_side < 1:
            raise BadConfigError(f"patch_side must be >= 1, got {self.patch_side}")
        if self.tau is not None and self.tau < 0:
            raise BadConfigError(f"tau must be >= 0, got {self.tau}")

    @classmethod
    def from_string(cls, text: str) -> "AggregationStrategy":
        """Parse strategy specs like "mean", "patch_max:10", "threshold:0.4", "area", "border"."""
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        if kind not in STRATEGY_KINDS:
            raise BadConfigError(f"unknown aggregation kind {kind!r}, expected one of {STRATEGY_KINDS}")
        strategy = cls(kind=kind)
        if not arg:
            return strategy
        if kind == "patch_max":
            return replace(strategy, patch_side=int(arg))
        if kind == "threshold":
            return replace(strategy, tau=float(arg))
        if kind == "area":
            return replace(strategy, background_class=int(arg))
        raise BadConfigError(f"strategy {kind!r} takes no parameter, got {arg!r}")

    def describe(self) -> str:
        if self.kind == "patch_max":
            return f"patch_max:{self.patch_side}"
        if self.kind == "threshold":
            return "threshold:auto" if self.tau is None else f"threshold:{self.tau:g}"
        if self.kind == "area":
            return f"area:{self.background_class}"
        return self.kind


def apply_strategy(strategy: AggregationStrategy, u, labels=None, tau: float | None = None) -> float:
    """Dispatch one uncertainty map through `strategy`.

    `labels` is required for the area/border strategies; `tau` overrides the
    strategy's stored threshold (used for per-measure calibrated thresholds).
    """
    if strategy.kind == "mean":
        return aggregate_mean(u)
    if strategy.kind == "patch_max":
        return aggregate_patch_max(u, strategy.patch_side)
    if strategy.kind == "threshold":
        effective = tau if tau is not None else strategy.tau
        if effective is None:
            raise BadConfigError("threshold strategy used without a calibrated tau")
        return aggregate_threshold(u, effective)
    if labels is None:
        raise BadConfigError(f"strategy {strategy.kind!r} needs a label map")
    if strategy.kind == "area":
        return aggregate_area_normalized(u, labels, strategy.background_class)
    return aggregate_border_normalized(u, labels)
