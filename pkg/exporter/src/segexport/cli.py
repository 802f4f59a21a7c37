"""Command line: `segexport export --spec spec.json`."""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import export_predictions
from .spec import load_spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segexport",
        description="Export segmentation model predictions as sample grids plus a manifest.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_export = sub.add_parser("export", help="Run the model described by a spec file.")
    p_export.add_argument("--spec", required=True, help="Path to the export spec JSON.")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest_path = export_predictions(load_spec(args.spec))
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
