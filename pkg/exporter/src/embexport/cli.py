"""CLI: embexport export --backbone <id> --data <dir> --base-classes <file>
--novel-classes <file> --out <path>. Exit codes: 0 ok, 2 usage, 3 error."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from embexport.backbones import SUPPORTED, UNTRAINED_PREFIX, UnknownBackboneError
from embexport.exporter import DisjointnessError, ExportConfig, export, read_class_list


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Export frozen-backbone image features into an EMB1 embedding file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("export", help="extract features for a folder-of-folders dataset")
    ex.add_argument("--backbone", required=True,
                    help=f"one of {', '.join(SUPPORTED)}; prefix with "
                         f"'{UNTRAINED_PREFIX}' for a seeded random init (offline use)")
    ex.add_argument("--data", required=True, help="dataset root, one subfolder per class")
    ex.add_argument("--base-classes", required=True, help="file of base class names")
    ex.add_argument("--novel-classes", required=True, help="file of novel class names")
    ex.add_argument("--out", required=True, help="output .emb1 path")
    ex.add_argument("--train-fraction", type=float, default=0.8)
    ex.add_argument("--batch-size", type=int, default=32)
    ex.set_defaults(func=cmd_export)
    return parser


def cmd_export(args: argparse.Namespace) -> int:
    config = ExportConfig(
        backbone=args.backbone,
        data_dir=Path(args.data),
        base_classes=read_class_list(args.base_classes),
        novel_classes=read_class_list(args.novel_classes),
        output=Path(args.out),
        train_fraction=args.train_fraction,
        batch_size=args.batch_size,
    )
    result = export(config)
    print(
        f"wrote {result.output} ({result.n_records} records, dim={result.dim}); "
        f"manifest at {result.manifest}"
    )
    if result.skipped:
        print(f"skipped {len(result.skipped)} unreadable images", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnknownBackboneError, DisjointnessError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
