"""Entropy decomposition of segmentation predictive distributions.

The central object is the sample grid, a dense ``[M][N][C][H][W]`` probability
tensor holding N generative samples from each of M model instances. Per pixel,
the grid decomposes into

* aleatoric uncertainty: mean over instances of the entropy of each
  instance's averaged prediction,
* total uncertainty: entropy of the grand average over instances and samples,
* epistemic uncertainty: their difference (a mutual information, nonnegative).

All entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InvariantViolationError,
    NegativeProbabilityError,
    NonFiniteDataError,
    NonNormalizedError,
    ShapeError,
)

# Off-simplex tolerance: deviations up to this are renormalized, beyond rejected.
SIMPLEX_ATOL = 1e-5
# Sums within this of 1 are left untouched so already-normalized data keeps its bits.
RENORM_SKIP_ATOL = 1e-12
# Entries below this are rejected; in (-NEGATIVE_ATOL, 0) they are round-off, clamped to 0.
NEGATIVE_ATOL = 1e-9
# EU below this before clamping signals corrupted input rather than numerics.
EU_CLAMP_ATOL = 1e-6


def _validated_probs(p: np.ndarray, axis: int) -> np.ndarray:
    """Check simplex membership along `axis`, clamp round-off, renormalize."""
    if not np.all(np.isfinite(p)):
        raise NonFiniteDataError("probabilities contain NaN or infinite entries")
    if np.any(p < -NEGATIVE_ATOL):
        raise NegativeProbabilityError(
            f"probability entries as low as {float(p.min()):.3e} (tolerance -{NEGATIVE_ATOL:g})"
        )
    p = np.where(p < 0.0, 0.0, p)
    sums = p.sum(axis=axis, keepdims=True)
    dev = np.abs(sums - 1.0)
    worst = float(dev.max())
    if worst > SIMPLEX_ATOL:
        raise NonNormalizedError(
            f"class probabilities sum to 1 {worst:.3e} off (tolerance {SIMPLEX_ATOL:g})"
        )
    if worst > RENORM_SKIP_ATOL:
        p = p / sums
    return p


def shannon_entropy(probs, axis: int = -1):
    """Shannon entropy in nats along the class axis, with 0*ln(0) = 0.

    Accepts a single class-probability vector or any array with a class axis;
    the entropy is taken per vector. Entries must be nonnegative (round-off
    below 1e-9 is clamped) and sum to 1 within 1e-5 (renormalized).

    The zero-probability convention is enforced by branching rather than by
    padding with an epsilon, so one-hot vectors have entropy exactly 0.
    """
    p = _validated_probs(np.asarray(probs, dtype=np.float64), axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, -p * np.log(p), 0.0)
    return terms.sum(axis=axis)


@dataclass(frozen=True)
class SampleGrid:
    """Per-image probability tensor of shape ``[M][N][C][H][W]``.

    M indexes epistemic model instances, N aleatoric samples per instance,
    C the classes. Validated on construction: rank 5, C >= 2, finite entries,
    per-pixel class vectors on the simplex within 1e-5 (renormalized).
    N = 1 encodes a deterministic generative head; M = 1 encodes a model
    without an epistemic component.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 5:
            raise ShapeError(f"sample grid must have rank 5 [M][N][C][H][W], got rank {p.ndim}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeError(f"instance and sample axes must be nonempty, got shape {p.shape}")
        if p.shape[2] < 2:
            raise ShapeError(f"class axis must have at least 2 entries, got {p.shape[2]}")
        object.__setattr__(self, "probs", _validated_probs(p, axis=2))

    @property
    def instances(self) -> int:
        return self.probs.shape[0]

    @property
    def samples(self) -> int:
        return self.probs.shape[1]

    @property
    def classes(self) -> int:
        return self.probs.shape[2]

    @property
    def height(self) -> int:
        return self.probs.shape[3]

    @property
    def width(self) -> int:
        return self.probs.shape[4]


@dataclass(frozen=True)
class UncertaintyMaps:
    """Per-pixel aleatoric, epistemic and total uncertainty in nats, shape [H][W].

    By construction au + eu = tu within 1e-6 and 0 <= au <= tu <= ln(C).
    """

    au: np.ndarray
    eu: np.ndarray
    tu: np.ndarray


def bma(grid: SampleGrid) -> np.ndarray:
    """Model-averaged prediction, shape [C][H][W].

    Means are taken over the sample axis first, then the instance axis, so
    the accumulation order is fixed regardless of caller parallelism.
    """
    return grid.probs.mean(axis=1).mean(axis=0)


def decompose(grid: SampleGrid) -> UncertaintyMaps:
    """Split a sample grid into aleatoric, epistemic and total uncertainty maps.

    Per pixel: au is the mean over instances of the entropy of each instance's
    sample-averaged prediction; tu is the entropy of the grand average; eu is
    tu - au, clamped to [0, inf) after checking it is no more negative than
    numerical round-off allows (-1e-6). A larger negative difference indicates
    corrupted input and raises ``InvariantViolationError``.
    """
    instance_mean = grid.probs.mean(axis=1)  # [M][C][H][W]
    au = shannon_entropy(instance_mean, axis=1).mean(axis=0)
    tu = shannon_entropy(instance_mean.mean(axis=0), axis=0)
    eu = tu - au
    worst = float(eu.min())
    if worst < -EU_CLAMP_ATOL:
        raise InvariantViolationError(
            f"epistemic uncertainty reached {worst:.3e} before clamping "
            f"(tolerance -{EU_CLAMP_ATOL:g}); input is likely corrupted"
        )
    eu = np.maximum(eu, 0.0)
    return UncertaintyMaps(au=au, eu=eu, tu=tu)


def decompose_no_eu(grid: SampleGrid) -> UncertaintyMaps:
    """Decompose a grid from a model without an epistemic component.

    Requires M = 1 and N > 1. The N generative samples are reinterpreted along
    the instance axis (grid reshaped to M=N, N=1) and decomposed as usual; the
    au/eu naming is kept as-is, downstream reports label such runs "no EU".
    """
    if grid.instances != 1:
        raise ShapeError(f"expected a single-instance grid, got M={grid.instances}")
    if grid.samples == 1:
        raise ShapeError(
            "M=1, N=1 grid is a deterministic prediction and has no decomposition"
        )
    return decompose(SampleGrid(np.swapaxes(grid.probs, 0, 1)))
