"""Thin CLI mirroring the ExtractionJob fields."""

from __future__ import annotations

import argparse
import sys

from .backends import extract
from .jobs import BACKENDS, ExtractionJob, ExtractorError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridprune-extract",
        description="export token-field tensor dumps from a CLIP-style checkpoint",
    )
    parser.add_argument("--model", required=True, help="checkpoint id or local path")
    parser.add_argument(
        "--image", action="append", required=True, dest="images",
        help="image path (repeatable)",
    )
    parser.add_argument("--prompt", required=True)
    parser.add_argument("--backend", choices=BACKENDS, default="clip_penultimate")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        model=args.model,
        images=tuple(args.images),
        prompt=args.prompt,
        backend=args.backend,
        out_dir=args.out,
    )
    try:
        written = extract(job)
    except ExtractorError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
