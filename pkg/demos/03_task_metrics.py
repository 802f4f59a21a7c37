"""The three downstream task scores plus the segmentation-quality metrics.

* shift detection: rank-based AUROC over per-image uncertainty scores
* ambiguity: correlation between an uncertainty map and annotator variance
* calibration: logistic confidence from negated uncertainty, scored by
  average calibration error over 20 equal-width bins
* overlap: Dice and generalized energy distance over sampled masks
"""

import numpy as np

from uqtangle import (
    ace,
    annotator_variance_map,
    auroc,
    dice,
    fit_platt,
    ged,
    ncc,
)

rng = np.random.default_rng(0)

# --- shift detection ----------------------------------------------------------
id_scores = rng.normal(0.20, 0.05, size=60)
shifted_scores = rng.normal(0.35, 0.08, size=60)
print(f"AUROC, shifted-vs-in-distribution scores : {auroc(id_scores, shifted_scores):.4f}")
print(f"AUROC with the labels swapped            : {auroc(shifted_scores, id_scores):.4f}")

# --- ambiguity ------------------------------------------------------------------
# 6 annotators disagree inside a band; a good aleatoric map lights up there
ann = np.zeros((6, 16, 16), dtype=int)
band = slice(6, 10)
for r in range(6):
    ann[r, band] = rng.integers(0, 2, size=(4, 16))
variance = annotator_variance_map(ann, 2)
good_map = variance + rng.normal(0, 0.02, size=variance.shape)
flat_map = rng.random(variance.shape) * 0.1
print(f"\nambiguity NCC, map tracking annotator variance : {ncc(variance, good_map):.4f}")
print(f"ambiguity NCC, unrelated noise map             : {ncc(variance, flat_map):.4f}")

# --- calibration ---------------------------------------------------------------
# pixels with low uncertainty are usually right, high uncertainty often wrong
u = rng.uniform(0.0, 0.7, size=50_000)
p_correct = 1.0 / (1.0 + np.exp(-(2.5 * (-u) + 1.8)))
correct = (rng.random(u.size) < p_correct).astype(float)
params = fit_platt(u, correct, measure="tu")
conf = params.confidence(u)
print(f"\nfitted confidence map: sigmoid({params.a:.3f} * (-u) + {params.b:.3f})")
print(f"calibration error over 20 bins: {ace(conf, correct):.4f}")
print(f"uncalibrated (1 - u) as confidence would score: {ace(1.0 - u, correct):.4f}")

# --- segmentation quality --------------------------------------------------------
truth = np.zeros((16, 16), dtype=int)
truth[5:11, 5:11] = 1
pred = np.roll(truth, 1, axis=1)
print(f"\nDice of a one-pixel-shifted mask: {dice(pred, truth, 2):.4f}")
samples = [np.roll(truth, int(s), axis=0) for s in rng.integers(-1, 2, size=8)]
annotations = [np.roll(truth, int(s), axis=0) for s in rng.integers(-1, 2, size=4)]
print(f"GED between sampled masks and annotations: {ged(samples, annotations, 2):.4f}")
print(f"GED of identical sets: {ged([truth], [truth], 2):.4f}")
