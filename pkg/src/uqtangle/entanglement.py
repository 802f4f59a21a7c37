"""Entanglement scoring and rank aggregation across tasks.

Each downstream task has a theoretically correct uncertainty measure
(ambiguity: aleatoric, shift detection: epistemic, calibration: total). The
entanglement score compares the performance of the correct measure against a
designated wrong one: it is the signed angular deviation of the point
(wrong, correct) from the diagonal, scaled to [-1, 1]. Positive values mean
the correct measure wins, i.e. the decomposition is disentangled on that task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import rankdata

from .errors import (
    BadConfigError,
    EmptySplitError,
    MissingCellError,
    NonFiniteDataError,
    UnknownTaskError,
)

TASKS = ("oodd", "amb", "cal")

_QUARTER_PI = math.pi / 4.0


@dataclass(frozen=True)
class TaskSpec:
    """Measure assignment for one task.

    `sign` is -1 when lower task scores are better (calibration error),
    +1 otherwise.
    """

    task: str
    correct_measure: str
    wrong_measure: str
    sign: int


@dataclass(frozen=True)
class TaskResult:
    """One (model, task, split) cell: the three measure scores and the
    entanglement value derived from them.

    `delta_floored` marks cells where a negative task score was floored to 0
    before the angle was taken; `delta_degenerate` marks both scores zero.
    """

    model_id: str
    task: str
    split: str
    u_au: float
    u_eu: float
    u_tu: float
    delta: float
    delta_floored: bool = False
    delta_degenerate: bool = False

    def score(self, measure: str) -> float:
        return {"au": self.u_au, "eu": self.u_eu, "tu": self.u_tu}[measure]


def assign_measures(task: str, cal_wrong_measure: str = "au") -> TaskSpec:
    """Correct/wrong measure pair and comparison sign for a task.

    Ambiguity is best addressed by the aleatoric measure, shift detection by
    the epistemic one, calibration by the total. The wrong measure for
    calibration is configurable because total uncertainty has two natural
    confounds; the aleatoric one is the default since collapse of the
    epistemic part drives total toward aleatoric.
    """
    t = task.lower()
    if t == "oodd":
        return TaskSpec("oodd", correct_measure="eu", wrong_measure="au", sign=+1)
    if t == "amb":
        return TaskSpec("amb", correct_measure="au", wrong_measure="eu", sign=+1)
    if t == "cal":
        if cal_wrong_measure not in ("au", "eu"):
            raise BadConfigError(
                f"calibration wrong-measure must be 'au' or 'eu', got {cal_wrong_measure!r}"
            )
        return TaskSpec("cal", correct_measure="tu", wrong_measure=cal_wrong_measure, sign=-1)
    raise UnknownTaskError(f"unknown task {task!r}, expected one of {TASKS}")


def delta(u_correct: float, u_wrong: float, sign: int) -> float:
    """Entanglement score: sign * (atan2(u_correct, u_wrong) - pi/4) / (pi/4).

    Negative inputs are floored at 0 so the score stays in [-1, 1]; the atan2
    form extends the arctan of the ratio continuously to a zero denominator.
    Equal scores (including both zero) sit exactly on the disentanglement
    boundary and return 0.0.
    """
    if not (math.isfinite(u_correct) and math.isfinite(u_wrong)):
        raise NonFiniteDataError(f"task scores must be finite, got ({u_correct}, {u_wrong})")
    if sign not in (1, -1):
        raise BadConfigError(f"sign must be +1 or -1, got {sign}")
    uc = max(float(u_correct), 0.0)
    uw = max(float(u_wrong), 0.0)
    if uc == uw:
        return 0.0
    return sign * (math.atan2(uc, uw) - _QUARTER_PI) / _QUARTER_PI


def make_task_result(model_id: str, spec: TaskSpec, split: str, scores: dict) -> TaskResult:
    """Assemble a TaskResult from per-measure scores, recording flooring flags."""
    uc = scores[spec.correct_measure]
    uw = scores[spec.wrong_measure]
    floored = uc < 0.0 or uw < 0.0
    degenerate = max(uc, 0.0) == 0.0 and max(uw, 0.0) == 0.0
    return TaskResult(
        model_id=model_id,
        task=spec.task,
        split=split,
        u_au=float(scores["au"]),
        u_eu=float(scores["eu"]),
        u_tu=float(scores["tu"]),
        delta=delta(uc, uw, spec.sign),
        delta_floored=floored,
        delta_degenerate=degenerate,
    )


def collapse_ratio(maps) -> float:
    """Ratio of mean epistemic to mean aleatoric uncertainty across images.

    Per image the maps are reduced by their image-wise mean; the ratio of the
    two across-image means is returned (robust to single images with near-zero
    aleatoric mean). An exactly zero denominator yields +inf.
    """
    maps = list(maps)
    if not maps:
        raise EmptySplitError("no images in split")
    eu_mean = float(sum(float(m.eu.mean()) for m in maps) / len(maps))
    au_mean = float(sum(float(m.au.mean()) for m in maps) / len(maps))
    if au_mean == 0.0:
        return math.inf
    return eu_mean / au_mean


def rank_models(results, key: str = "performance", cal_wrong_measure: str = "au") -> dict:
    """Mean rank per model across tasks, Table-style averaging order.

    Within each (task, split) cell models are ranked 1..K with 1 best (highest
    AUROC/NCC/entanglement, lowest calibration error) and ties averaged. Cell
    ranks are averaged over splits within each task first, then over tasks.
    Every model must have a score in every observed cell.
    """
    if key not in ("performance", "delta"):
        raise BadConfigError(f"rank key must be 'performance' or 'delta', got {key!r}")
    results = list(results)
    if not results:
        raise EmptySplitError("no task results to rank")
    models = sorted({r.model_id for r in results})
    cells: dict = {}
    for r in results:
        cells.setdefault((r.task, r.split), {})[r.model_id] = r
    missing = [
        (m, task, split)
        for (task, split), entries in sorted(cells.items())
        for m in models
        if m not in entries
    ]
    if missing:
        raise MissingCellError(missing)

    task_splits: dict = {}
    for task, split in cells:
        task_splits.setdefault(task, []).append(split)

    per_task_ranks = {m: [] for m in models}
    for task in sorted(task_splits):
        spec = assign_measures(task, cal_wrong_measure=cal_wrong_measure)
        split_ranks = {m: [] for m in models}
        for split in sorted(task_splits[task]):
            entries = cells[(task, split)]
            if key == "delta":
                values = [entries[m].delta for m in models]
                higher_better = True
            else:
                values = [entries[m].score(spec.correct_measure) for m in models]
                higher_better = spec.sign > 0
            oriented = [-v for v in values] if higher_better else values
            ranks = rankdata(oriented)
            for m, r in zip(models, ranks):
                split_ranks[m].append(float(r))
        for m in models:
            per_task_ranks[m].append(sum(split_ranks[m]) / len(split_ranks[m]))
    return {m: sum(rs) / len(rs) for m, rs in per_task_ranks.items()}
