"""Result persistence and report emission.

A completed run is saved as a JSON bundle; one or more bundles (several models
and/or seed repetitions) are merged into CSV tables and scatter data. All
floating-point report values are printed with 6 significant digits and no
locale dependence, and emission is fully deterministic so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np
from scipy.stats import t as student_t

from .aggregation import AggregationStrategy
from .entanglement import TaskResult, assign_measures, rank_models
from .errors import MissingCellError
from .metrics import PlattParams
from .pipeline import CollapseStat, ResultBundle, RunConfig, SegStat

BUNDLE_SCHEMA_VERSION = 1


def _fmt(x) -> str:
    """6-significant-digit, locale-independent float formatting."""
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".6g")


def _json_float(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(_fmt(x))


def _versions() -> dict:
    import scipy

    from . import __version__

    return {"uqtangle": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def bundle_to_dict(bundle: ResultBundle) -> dict:
    config = asdict(bundle.config)
    config["aggregation"] = bundle.config.aggregation.describe()
    config["tasks"] = list(bundle.config.tasks)
    # Worker count is an execution resource, not part of the run identity;
    # reports must be byte-identical across thread counts.
    config.pop("workers")
    return {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "model_id": bundle.model_id,
        "dataset_name": bundle.dataset_name,
        "seed_tag": bundle.seed_tag,
        "class_count": bundle.class_count,
        "no_eu": bundle.no_eu,
        "config": config,
        "task_results": [asdict(r) for r in bundle.task_results],
        "collapse": [
            {"split": c.split, "eu_over_au": None if math.isinf(c.eu_over_au) else c.eu_over_au,
             "infinite": math.isinf(c.eu_over_au)}
            for c in bundle.collapse
        ],
        "segmentation": [asdict(s) for s in bundle.segmentation],
        "platt": {m: asdict(p) for m, p in sorted(bundle.platt.items())},
        "thresholds": {m: v for m, v in sorted(bundle.thresholds.items())},
        "versions": _versions(),
    }


def bundle_from_dict(data: dict) -> ResultBundle:
    config = dict(data["config"])
    config["aggregation"] = AggregationStrategy.from_string(config["aggregation"])
    config["tasks"] = tuple(config["tasks"])
    return ResultBundle(
        model_id=data["model_id"],
        dataset_name=data["dataset_name"],
        seed_tag=data["seed_tag"],
        class_count=data["class_count"],
        config=RunConfig(**config),
        task_results=[TaskResult(**r) for r in data["task_results"]],
        collapse=[
            CollapseStat(c["split"], math.inf if c["infinite"] else c["eu_over_au"])
            for c in data["collapse"]
        ],
        segmentation=[SegStat(**s) for s in data["segmentation"]],
        platt={m: PlattParams(**p) for m, p in data["platt"].items()},
        thresholds=dict(data["thresholds"]),
        no_eu=data["no_eu"],
    )


def save_bundle(bundle: ResultBundle, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(bundle_to_dict(bundle), indent=2, sort_keys=True) + "\n")
    return path


def load_bundle(path) -> ResultBundle:
    return bundle_from_dict(json.loads(Path(path).read_text()))


def t_interval_halfwidth(values, confidence: float = 0.95) -> float | None:
    """Half-width of the Student-t interval for the mean; None below 2 values."""
    values = np.asarray(list(values), dtype=np.float64)
    n = values.size
    if n < 2:
        return None
    spread = values.std(ddof=1)
    return float(student_t.ppf(0.5 + confidence / 2.0, n - 1) * spread / np.sqrt(n))


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _rank_rows(bundles) -> list:
    """Per-model mean ranks over seeds, Table-style averaging per seed first."""
    seeds = sorted({b.config.seed for b in bundles})
    models = sorted({b.model_id for b in bundles})
    per_seed = {}
    for seed in seeds:
        group = [b for b in bundles if b.config.seed == seed]
        present = {b.model_id for b in group}
        missing = [(m, "any", f"seed={seed}") for m in models if m not in present]
        if missing:
            raise MissingCellError(missing)
        results = [r for b in group for r in b.task_results]
        cal_wrong = group[0].config.cal_wrong_measure
        per_seed[seed] = {
            "performance": rank_models(results, key="performance", cal_wrong_measure=cal_wrong),
            "delta": rank_models(results, key="delta", cal_wrong_measure=cal_wrong),
        }
    rows = []
    for model in models:
        perf = [per_seed[s]["performance"][model] for s in seeds]
        dlt = [per_seed[s]["delta"][model] for s in seeds]
        rows.append((
            model,
            _fmt(np.mean(perf)),
            _fmt(t_interval_halfwidth(perf)),
            _fmt(np.mean(dlt)),
            _fmt(t_interval_halfwidth(dlt)),
            str(len(seeds)),
        ))
    return rows


def emit_reports(bundles, out_dir) -> dict:
    """Write the report set for one or several bundles; returns path mapping.

    Files: tasks.csv (one row per model/task/split), ranks.csv (mean
    performance and entanglement ranks with Student-t half-widths over seeds),
    scatter.json (wrong-measure vs correct-measure points per task),
    collapse.csv, segmentation.csv (when computed) and run_metadata.json.
    """
    if isinstance(bundles, ResultBundle):
        bundles = [bundles]
    bundles = sorted(bundles, key=lambda b: (b.model_id, b.config.seed, b.seed_tag))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    task_rows = []
    for b in bundles:
        for r in sorted(b.task_results, key=lambda r: (r.task, r.split)):
            task_rows.append((
                b.model_id, str(b.config.seed), r.task, r.split,
                _fmt(r.u_au), _fmt(r.u_eu), _fmt(r.u_tu), _fmt(r.delta),
                str(int(r.delta_floored)), str(int(r.delta_degenerate)),
                str(int(b.no_eu)),
            ))
    paths["tasks"] = out_dir / "tasks.csv"
    _write_csv(
        paths["tasks"],
        ("model_id", "seed", "task", "split", "u_au", "u_eu", "u_tu",
         "delta", "delta_floored", "delta_degenerate", "no_eu"),
        task_rows,
    )

    paths["ranks"] = out_dir / "ranks.csv"
    _write_csv(
        paths["ranks"],
        ("model_id", "perf_rank", "perf_rank_halfwidth",
         "delta_rank", "delta_rank_halfwidth", "seeds"),
        _rank_rows(bundles),
    )

    scatter = {}
    for task in sorted({r.task for b in bundles for r in b.task_results}):
        spec = assign_measures(task, cal_wrong_measure=bundles[0].config.cal_wrong_measure)
        points = []
        for b in bundles:
            for r in sorted(b.task_results, key=lambda r: r.split):
                if r.task != task:
                    continue
                points.append({
                    "model_id": b.model_id,
                    "seed": b.config.seed,
                    "split": r.split,
                    "x": _json_float(r.score(spec.wrong_measure)),
                    "y": _json_float(r.score(spec.correct_measure)),
                    "delta": _json_float(r.delta),
                })
        scatter[task] = {
            "correct_measure": spec.correct_measure,
            "wrong_measure": spec.wrong_measure,
            "points": points,
        }
    paths["scatter"] = out_dir / "scatter.json"
    paths["scatter"].write_text(json.dumps(scatter, indent=2, sort_keys=True) + "\n")

    collapse_rows = [
        (b.model_id, str(b.config.seed), c.split, _fmt(c.eu_over_au))
        for b in bundles
        for c in sorted(b.collapse, key=lambda c: c.split)
    ]
    paths["collapse"] = out_dir / "collapse.csv"
    _write_csv(paths["collapse"], ("model_id", "seed", "split", "eu_over_au"), collapse_rows)

    seg_rows = [
        (b.model_id, str(b.config.seed), s.split, _fmt(s.dice), _fmt(s.ged))
        for b in bundles
        for s in sorted(b.segmentation, key=lambda s: s.split)
    ]
    if seg_rows:
        paths["segmentation"] = out_dir / "segmentation.csv"
        _write_csv(paths["segmentation"], ("model_id", "seed", "split", "dice", "ged"), seg_rows)

    metadata = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "versions": _versions(),
        "runs": [
            {
                "model_id": b.model_id,
                "seed": b.config.seed,
                "seed_tag": b.seed_tag,
                "dataset_name": b.dataset_name,
                "class_count": b.class_count,
                "no_eu": b.no_eu,
                "config": bundle_to_dict(b)["config"],
                "platt": {m: {"a": _json_float(p.a), "b": _json_float(p.b),
                              "degenerate": p.degenerate}
                          for m, p in sorted(b.platt.items())},
                "thresholds": {m: _json_float(v) for m, v in sorted(b.thresholds.items())},
            }
            for b in bundles
        ],
    }
    paths["metadata"] = out_dir / "run_metadata.json"
    paths["metadata"].write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    return paths
