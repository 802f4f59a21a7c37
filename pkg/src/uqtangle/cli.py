"""Command-line interface.

Subcommands: `synth` generates a toy world and writes it in the ingest format,
`eval` runs the evaluation pipeline on a manifest, `report` merges saved run
bundles into rank tables, and `inspect` prints one image's uncertainty maps
as CSV grids.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .aggregation import AggregationStrategy
from .errors import UqtangleError
from .manifest import load_manifest
from .pipeline import RunConfig, decompose_entry, run_pipeline
from .reports import emit_reports, load_bundle, save_bundle
from .synthetic import WorldConfig, generate_world, sample_dataset, write_dataset


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--model-id", default="model", help="Identifier used in report rows.")
    parser.add_argument("--tasks", default="oodd,amb,cal",
                        help="Comma-separated subset of: oodd,amb,cal,seg.")
    parser.add_argument("--aggregation", default="border",
                        help="mean | patch_max[:side] | threshold[:tau] | area[:background] | border.")
    parser.add_argument("--eu-instances", type=int, default=10,
                        help="Max model instances used per grid.")
    parser.add_argument("--au-samples", type=int, default=10,
                        help="Max generative samples used per instance.")
    parser.add_argument("--ace-bins", type=int, default=20, help="Calibration bins.")
    parser.add_argument("--ace-per-image", action="store_true",
                        help="Average per-image calibration error instead of pooling pixels.")
    parser.add_argument("--cal-wrong-measure", default="au", choices=("au", "eu"),
                        help="Confound measure for the calibration entanglement score.")
    parser.add_argument("--platt-cap", type=int, default=2_000_000,
                        help="Max pooled pixels for confidence fitting and scoring.")
    parser.add_argument("--seed", type=int, default=0, help="Run seed (subsampling).")
    parser.add_argument("--workers", type=int, default=None,
                        help="Worker threads (default: UQTANGLE_WORKERS or 1).")


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        model_id=args.model_id,
        tasks=tuple(t.strip() for t in args.tasks.split(",") if t.strip()),
        aggregation=AggregationStrategy.from_string(args.aggregation),
        eu_instances=args.eu_instances,
        au_samples=args.au_samples,
        ace_bins=args.ace_bins,
        ace_per_image=args.ace_per_image,
        cal_wrong_measure=args.cal_wrong_measure,
        platt_subsample_cap=args.platt_cap,
        seed=args.seed,
        workers=args.workers,
    )


def _cmd_synth(args) -> int:
    config = WorldConfig(
        classes=args.classes,
        height=args.height,
        width=args.width,
        instances=args.instances,
        perturbation_scale=args.perturbation_scale,
        ood_shift=args.ood_shift,
        seed=args.seed,
        waves=args.waves,
        temperature=args.temperature,
    )
    world = generate_world(config)
    dataset = sample_dataset(
        world,
        images=args.images,
        annotators=args.annotators,
        au_samples=args.au_samples,
        val_images=args.val_images,
        ood_fraction=args.ood_fraction,
        mode=args.mode,
    )
    manifest_path = write_dataset(dataset, args.out)
    print(f"wrote {len(dataset.images)} images and {manifest_path}")
    return 0


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _config_from_args(args)
    bundle = run_pipeline(manifest, config)
    out_dir = Path(args.out)
    bundle_path = save_bundle(bundle, out_dir / "bundle.json")
    paths = emit_reports(bundle, out_dir)
    print(f"wrote {bundle_path}")
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def _cmd_report(args) -> int:
    bundles = [load_bundle(p) for p in args.bundles]
    paths = emit_reports(bundles, args.out)
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def _cmd_inspect(args) -> int:
    manifest = load_manifest(args.manifest)
    matches = [e for e in manifest.images if e.image_id == args.image_id]
    if not matches:
        raise UqtangleError(f"image_id {args.image_id!r} not in manifest")
    config = _config_from_args(args)
    _, maps, no_eu = decompose_entry(matches[0], config)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for name, grid in (("au", maps.au), ("eu", maps.eu), ("tu", maps.tu)):
        lines = [",".join(format(v, ".6g") for v in row) for row in grid]
        text = "\n".join(lines) + "\n"
        if out_dir:
            (out_dir / f"{args.image_id}_{name}.csv").write_text(text)
        else:
            print(f"# {name}" + (" (no EU decomposition)" if no_eu else ""))
            sys.stdout.write(text)
    if out_dir:
        print(f"wrote maps for {args.image_id} to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqtangle",
        description="Uncertainty decomposition, downstream task scoring and entanglement reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="Generate a synthetic dataset in the ingest format.")
    p_synth.add_argument("--out", required=True, help="Output directory.")
    p_synth.add_argument("--classes", type=int, default=2)
    p_synth.add_argument("--height", type=int, default=16)
    p_synth.add_argument("--width", type=int, default=16)
    p_synth.add_argument("--instances", type=int, default=10,
                         help="Model instances in the synthetic family.")
    p_synth.add_argument("--perturbation-scale", type=float, default=0.3,
                         help="Logit noise controlling the epistemic component.")
    p_synth.add_argument("--ood-shift", type=float, default=1.0,
                         help="Per-instance logit offset scale on shifted images.")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--waves", type=int, default=8)
    p_synth.add_argument("--temperature", type=float, default=1.0)
    p_synth.add_argument("--images", type=int, default=40, help="Test images.")
    p_synth.add_argument("--val-images", type=int, default=8)
    p_synth.add_argument("--annotators", type=int, default=4)
    p_synth.add_argument("--au-samples", type=int, default=10)
    p_synth.add_argument("--ood-fraction", type=float, default=0.5)
    p_synth.add_argument("--mode", default="categorical",
                         choices=("categorical", "soft", "softmax"))
    p_synth.set_defaults(func=_cmd_synth)

    p_eval = sub.add_parser("eval", help="Run the evaluation pipeline on a manifest.")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True, help="Output directory for bundle and reports.")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_report = sub.add_parser("report", help="Merge saved bundles into rank tables.")
    p_report.add_argument("bundles", nargs="+", help="bundle.json files from eval runs.")
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=_cmd_report)

    p_inspect = sub.add_parser("inspect", help="Print one image's uncertainty maps as CSV grids.")
    p_inspect.add_argument("--manifest", required=True)
    p_inspect.add_argument("--image-id", required=True)
    p_inspect.add_argument("--out", default=None, help="Write CSVs here instead of stdout.")
    _add_config_flags(p_inspect)
    p_inspect.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UqtangleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
