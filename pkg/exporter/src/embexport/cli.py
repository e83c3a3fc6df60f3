"""Command line for the embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, MAX_TOKENS, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Write PDEMB1 token embeddings for a contexts file.",
    )
    parser.add_argument("--contexts", required=True,
                        help="contexts TSV produced by the segment/ingest steps")
    parser.add_argument("--articles", required=True,
                        help="directory of article{id}.txt files")
    parser.add_argument("--out", required=True, help="embedding file to write")
    parser.add_argument("--alignment", default=None,
                        help="alignment sidecar path (default: <out>.align.tsv)")
    parser.add_argument("--model", default="SpanBERT/spanbert-base-cased",
                        help="encoder name for real mode")
    parser.add_argument("--fake", action="store_true",
                        help="deterministic hash encoder; no model weights needed")
    parser.add_argument("--dim", type=int, default=768,
                        help="embedding width (must match the encoder)")
    parser.add_argument("--salt", type=int, default=0,
                        help="fake-mode hash salt")
    parser.add_argument("--max-tokens", type=int, default=MAX_TOKENS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    alignment = args.alignment or f"{args.out}.align.tsv"
    try:
        written = export(
            args.contexts, args.articles, args.out, alignment,
            fake=args.fake, model_name=args.model, dim=args.dim,
            salt=args.salt, max_tokens=args.max_tokens)
    except (ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written} contexts to {args.out} (alignment: {alignment})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
