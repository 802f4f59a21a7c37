"""Downstream task scoring.

Covers the three evaluation tasks plus two segmentation-quality scores:

* distribution-shift detection: rank-based AUROC over aggregated image scores,
* ambiguity modeling: normalized cross-correlation between an uncertainty map
  and the pixel-wise variance of multiple expert annotations,
* calibration: logistic (Platt) mapping from negated uncertainty to
  confidence, scored by average calibration error over equal-width bins,
* overlap quality: Dice and the generalized energy distance between sampled
  masks and annotator masks under d = 1 - IoU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from scipy.stats import rankdata

from .errors import (
    EmptyInputError,
    EmptySplitError,
    NonFiniteDataError,
    ShapeMismatchError,
)

MEASURES = ("au", "eu", "tu")

PLATT_PARAM_BOUND = 50.0
PLATT_GRAD_TOL = 1e-8
PLATT_MAX_ITER = 500


def auroc(id_scores, ood_scores) -> float:
    """Area under the ROC curve with out-of-distribution as the positive class.

    Rank-based (Mann-Whitney) formulation; ties contribute through midranks,
    so the result is invariant under any strictly increasing transform of the
    pooled scores.
    """
    id_s = np.asarray(id_scores, dtype=np.float64).ravel()
    ood_s = np.asarray(ood_scores, dtype=np.float64).ravel()
    if id_s.size == 0 or ood_s.size == 0:
        raise EmptySplitError("AUROC needs at least one score on each side")
    pooled = np.concatenate([id_s, ood_s])
    if not np.all(np.isfinite(pooled)):
        raise NonFiniteDataError("scores contain NaN or infinite entries")
    ranks = rankdata(pooled)
    rank_sum = ranks[id_s.size:].sum()
    n_id, n_ood = id_s.size, ood_s.size
    return float((rank_sum - n_ood * (n_ood + 1) / 2.0) / (n_id * n_ood))


def annotator_variance_map(annotations, classes: int) -> np.ndarray:
    """Pixel-wise variance of one-hot encoded annotations, shape [H][W].

    With f_c the fraction of annotators voting class c per pixel, returns the
    population variance summed over classes, sum_c f_c (1 - f_c), which is
    1 - sum_c f_c^2. A single annotation yields an all-zero map.
    """
    ann = np.asarray(annotations)
    if ann.ndim != 3:
        raise ShapeMismatchError(f"expected [R][H][W] annotations, got rank {ann.ndim}")
    if ann.min() < 0 or ann.max() >= classes:
        raise ShapeMismatchError(f"annotation labels must lie in [0, {classes})")
    fractions = np.stack([(ann == c).mean(axis=0) for c in range(classes)])
    return 1.0 - (fractions ** 2).sum(axis=0)


def ncc(a, b) -> float:
    """Zero-mean normalized cross-correlation of two same-shape maps, in [-1, 1].

    Uses population statistics. If either map is constant the correlation is
    undefined; 0.0 is returned by convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"map shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ShapeMismatchError("maps are empty")
    # Detect constants by equality, not by zero variance: the computed mean of
    # a constant map can be off by an ulp, leaving spurious tiny residuals.
    if np.all(a == a.flat[0]) or np.all(b == b.flat[0]):
        return 0.0
    az = a - a.mean()
    bz = b - b.mean()
    sum_a2 = (az * az).sum()
    sum_b2 = (bz * bz).sum()
    if sum_a2 == 0.0 or sum_b2 == 0.0:
        return 0.0
    # Single sqrt of the product: algebraically sigma_a * sigma_b * P, and it
    # makes self-correlation exactly 1.0 (sqrt(x*x) == x in round-to-nearest).
    return float((az * bz).sum() / np.sqrt(sum_a2 * sum_b2))


def amb_score(variance_maps, uncertainty_maps) -> float:
    """Mean over images of ncc(annotator variance map, uncertainty map)."""
    variance_maps = list(variance_maps)
    uncertainty_maps = list(uncertainty_maps)
    if len(variance_maps) != len(uncertainty_maps):
        raise ShapeMismatchError(
            f"{len(variance_maps)} variance maps vs {len(uncertainty_maps)} uncertainty maps"
        )
    if not variance_maps:
        raise EmptyInputError("no images to correlate")
    values = [ncc(v, u) for v, u in zip(variance_maps, uncertainty_maps)]
    return float(np.mean(values))


def majority_vote(annotations, classes: int) -> np.ndarray:
    """Per-pixel majority label across annotators; ties take the lowest class index."""
    ann = np.asarray(annotations)
    counts = np.stack([(ann == c).sum(axis=0) for c in range(classes)])
    return counts.argmax(axis=0)


def correctness_map(class_probs, annotations, classes: int | None = None) -> np.ndarray:
    """Boolean map: model argmax equals the annotator majority vote.

    `class_probs` is a [C][H][W] averaged prediction; `annotations` is
    [R][H][W]. Argmax and majority-vote ties both resolve to the lowest class
    index, keeping the reference deterministic and annotator-symmetric.
    """
    probs = np.asarray(class_probs, dtype=np.float64)
    ann = np.asarray(annotations)
    if classes is None:
        classes = probs.shape[0]
    if probs.ndim != 3 or ann.ndim != 3:
        raise ShapeMismatchError("expected [C][H][W] probabilities and [R][H][W] annotations")
    if probs.shape[1:] != ann.shape[1:]:
        raise ShapeMismatchError(
            f"spatial shapes differ: {probs.shape[1:]} vs {ann.shape[1:]}"
        )
    prediction = probs.argmax(axis=0)
    return prediction == majority_vote(ann, classes)


@dataclass(frozen=True)
class PlattParams:
    """Fitted logistic map from uncertainty to confidence: sigmoid(a*(-u) + b).

    `degenerate` marks fits where every pixel had the same label, in which
    case a = 0 and b sits at the clamp with the sign of the labels.
    """

    a: float
    b: float
    measure: str | None = None
    degenerate: bool = False

    def confidence(self, u) -> np.ndarray:
        return expit(self.a * (-np.asarray(u, dtype=np.float64)) + self.b)


def fit_platt(u, correct, measure: str | None = None) -> PlattParams:
    """Fit logistic confidence parameters on pooled pixels.

    Minimizes binary cross-entropy of sigmoid(a*(-u) + b) against the
    correctness labels with an L-BFGS-B solver bounded to |a|, |b| <= 50,
    run to projected-gradient norm 1e-8 or 500 iterations. All-identical
    labels short-circuit to the clamped degenerate solution.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    y = np.asarray(correct, dtype=np.float64).ravel()
    if u.shape != y.shape:
        raise ShapeMismatchError(f"{u.size} uncertainties vs {y.size} labels")
    if u.size == 0:
        raise EmptyInputError("no pixels to fit")
    mean_y = float(y.mean())
    if mean_y in (0.0, 1.0):
        b = PLATT_PARAM_BOUND if mean_y == 1.0 else -PLATT_PARAM_BOUND
        return PlattParams(a=0.0, b=b, measure=measure, degenerate=True)

    x = -u

    def loss_grad(params):
        a, b = params
        z = a * x + b
        # BCE with logits: mean(softplus(z) - y*z), softplus via logaddexp.
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        residual = expit(z) - y
        return loss, np.array([np.mean(residual * x), np.mean(residual)])

    b0 = float(np.clip(np.log(mean_y / (1.0 - mean_y)), -PLATT_PARAM_BOUND, PLATT_PARAM_BOUND))
    result = minimize(
        loss_grad,
        x0=np.array([0.0, b0]),
        jac=True,
        method="L-BFGS-B",
        bounds=[(-PLATT_PARAM_BOUND, PLATT_PARAM_BOUND)] * 2,
        options={"maxiter": PLATT_MAX_ITER, "gtol": PLATT_GRAD_TOL, "ftol": 1e-16},
    )
    a, b = result.x
    return PlattParams(a=float(a), b=float(b), measure=measure)


def ace(confidences, correct, bins: int = 20) -> float:
    """Average calibration error over equal-width confidence bins.

    [0, 1] is split into `bins` equal-width bins, the last one right-closed so
    a confidence of exactly 1.0 lands in the top bin. Each non-empty bin
    contributes |mean confidence - accuracy|; bins are weighed equally, so
    large low-uncertainty regions cannot dominate the score.
    """
    conf = np.asarray(confidences, dtype=np.float64).ravel()
    y = np.asarray(correct, dtype=np.float64).ravel()
    if conf.size == 0:
        raise EmptyInputError("no pixels to score")
    if conf.shape != y.shape:
        raise ShapeMismatchError(f"{conf.size} confidences vs {y.size} labels")
    if conf.min() < 0.0 or conf.max() > 1.0:
        raise ShapeMismatchError("confidences must lie in [0, 1]")
    if bins < 1:
        raise EmptyInputError(f"bins must be >= 1, got {bins}")
    idx = np.minimum((conf * bins).astype(np.int64), bins - 1)
    order = np.argsort(idx, kind="stable")
    idx, conf, y = idx[order], conf[order], y[order]
    starts = np.searchsorted(idx, np.arange(bins))
    stops = np.searchsorted(idx, np.arange(bins), side="right")
    # Exactly-rounded bin sums (math.fsum) keep single-bin fixtures bit-exact
    # and make the score independent of accumulation order.
    gaps = [
        abs(math.fsum(conf[lo:hi].tolist()) / (hi - lo) - math.fsum(y[lo:hi].tolist()) / (hi - lo))
        for lo, hi in zip(starts, stops)
        if hi > lo
    ]
    return math.fsum(gaps) / len(gaps)


def dice(prediction, reference, classes: int) -> float:
    """Mean Dice over foreground classes 1..C-1.

    A class absent from both masks counts as a perfect 1.0.
    """
    pred = np.asarray(prediction)
    ref = np.asarray(reference)
    if pred.shape != ref.shape:
        raise ShapeMismatchError(f"mask shapes differ: {pred.shape} vs {ref.shape}")
    scores = []
    for c in range(1, classes):
        p = pred == c
        r = ref == c
        denom = int(p.sum()) + int(r.sum())
        scores.append(1.0 if denom == 0 else 2.0 * int((p & r).sum()) / denom)
    return float(np.mean(scores))


def _mask_distance(a, b, classes: int) -> float:
    """1 - IoU averaged over foreground classes; empty-vs-empty IoU is 1."""
    ious = []
    for c in range(1, classes):
        pa = a == c
        pb = b == c
        union = int((pa | pb).sum())
        ious.append(1.0 if union == 0 else int((pa & pb).sum()) / union)
    return 1.0 - float(np.mean(ious))


def ged(samples, annotations, classes: int) -> float:
    """Generalized energy distance between sampled masks and annotator masks.

    GED^2 = 2 E[d(s, y)] - E[d(s, s')] - E[d(y, y')] with d = 1 - IoU averaged
    over foreground classes; expectations are means over all ordered pairs.
    Duplicate masks are collapsed to unique masks with multiplicities before
    the pairwise pass, which leaves the expectations unchanged but makes large
    Monte-Carlo draws over a small mask support cheap. Returns
    sqrt(max(GED^2, 0)).
    """
    samples = [np.asarray(s) for s in samples]
    annotations = [np.asarray(a) for a in annotations]
    if not samples or not annotations:
        raise EmptyInputError("need at least one sample and one annotation")
    shape = samples[0].shape
    for m in samples + annotations:
        if m.shape != shape:
            raise ShapeMismatchError(f"mask shapes differ: {shape} vs {m.shape}")

    def dedupe(masks):
        unique, weights = {}, {}
        for m in masks:
            key = m.tobytes()
            if key in weights:
                weights[key] += 1
            else:
                unique[key] = m
                weights[key] = 1
        total = len(masks)
        return list(unique.values()), np.array([weights[k] / total for k in unique])

    s_masks, s_w = dedupe(samples)
    y_masks, y_w = dedupe(annotations)

    def expectation(xs, xw, ys, yw):
        return float(
            sum(
                wx * wy * _mask_distance(x, y, classes)
                for x, wx in zip(xs, xw)
                for y, wy in zip(ys, yw)
            )
        )

    e_sy = expectation(s_masks, s_w, y_masks, y_w)
    e_ss = expectation(s_masks, s_w, s_masks, s_w)
    e_yy = expectation(y_masks, y_w, y_masks, y_w)
    ged_sq = 2.0 * e_sy - e_ss - e_yy
    return float(np.sqrt(max(ged_sq, 0.0)))
