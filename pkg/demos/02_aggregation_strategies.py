"""Reducing a pixel-wise uncertainty map to one scalar per image.

Five strategies: image-wise mean, sliding patch maximum, above-threshold
fraction, and sums normalized by predicted foreground area or border length.
The normalized variants avoid rewarding big segmentations with big scores.
"""

import numpy as np

from uqtangle import (
    aggregate_area_normalized,
    aggregate_border_normalized,
    aggregate_mean,
    aggregate_patch_max,
    aggregate_threshold,
    border_length,
)

# a synthetic map: low background uncertainty plus one hot 4x4 region
u = np.full((16, 16), 0.05)
u[4:8, 4:8] = 0.65

# a predicted segmentation: foreground blob roughly around the hot region
labels = np.zeros((16, 16), dtype=int)
labels[3:9, 3:9] = 1

print("uncertainty map: 16x16, background 0.05, one 4x4 region at 0.65")
print(f"  image-wise mean          : {aggregate_mean(u):.4f}")
print(f"  4x4 sliding patch max    : {aggregate_patch_max(u, 4):.4f}")
print(f"  fraction above tau=0.3   : {aggregate_threshold(u, 0.3):.4f}")
print(f"  area-normalized sum      : {aggregate_area_normalized(u, labels):.4f} "
      f"(area {np.count_nonzero(labels)})")
print(f"  border-normalized sum    : {aggregate_border_normalized(u, labels):.4f} "
      f"(border {border_length(labels)})")

# size sensitivity: models are typically uncertain along the predicted boundary,
# so the raw uncertainty sum scales with the perimeter and plain means reward
# large masks; normalizing by border length removes that size effect
def boundary_case(side):
    mask = np.zeros((24, 24), dtype=int)
    lo, hi = 12 - side // 2, 12 + side // 2
    mask[lo:hi, lo:hi] = 1
    inner = np.zeros_like(mask)
    inner[lo + 1:hi - 1, lo + 1:hi - 1] = 1
    return 0.5 * (mask - inner).astype(float), mask


print("\nboundary uncertainty, small vs large segmentation of the same quality")
for side in (6, 12, 18):
    ring_u, mask = boundary_case(side)
    print(f"  {side:2d}px mask: mean {aggregate_mean(ring_u):.4f}   "
          f"border-normalized {aggregate_border_normalized(ring_u, mask):.4f}")
print("  the mean triples with mask size; the border-normalized score barely moves")
