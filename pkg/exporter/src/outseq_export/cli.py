"""Command-line export tool."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .backends import MODEL_DIMS, UnknownModel
from .export import ExportJob, run_job


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outseq-export",
        description="Write static or per-token contextual embedding files for a column corpus",
    )
    parser.add_argument("--version", action="version", version=f"outseq-export {__version__}")
    parser.add_argument("--corpus", required=True, help="column corpus file")
    parser.add_argument("--model", required=True,
                        help="model identifier (see --list-models) or hash<dim>")
    parser.add_argument("--mode", choices=("static", "contextual"), required=True)
    parser.add_argument("--pooling", choices=("mean", "first"), default="mean",
                        help="how subword pieces combine into one token vector")
    parser.add_argument("--layer", type=int, default=-1,
                        help="which representation layer to export (default: final)")
    parser.add_argument("--out", required=True, help="output file path")
    return parser


def main(argv=None) -> int:
    args_list = list(sys.argv[1:] if argv is None else argv)
    if "--list-models" in args_list:
        for name, dim in sorted(MODEL_DIMS.items()):
            print(f"{name}\t{dim}")
        return 0
    args = build_parser().parse_args(args_list)
    job = ExportJob(
        corpus=args.corpus, model=args.model, mode=args.mode,
        out=args.out, pooling=args.pooling, layer=args.layer,
    )
    try:
        count = run_job(job)
    except (UnknownModel, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    unit = "words" if args.mode == "static" else "sentences"
    print(f"wrote {count} {unit} -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
