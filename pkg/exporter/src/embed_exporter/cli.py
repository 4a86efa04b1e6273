"""CLI: embed-exporter export --problems <path> --out <path>
[--encoder <hf-id>] [--pooling mean|cls] [--batch 16]"""

from __future__ import annotations

import argparse
import json
import sys

from .export import DEFAULT_ENCODER, DEFAULT_MAX_LENGTH, ExportError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-exporter")
    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("export", help="embed problems.jsonl into a portable embedding file")
    p.add_argument("--problems", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", default=DEFAULT_ENCODER)
    p.add_argument("--pooling", choices=("mean", "cls"), default="mean")
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    return parser


def cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.command != "export":
        parser.print_usage(sys.stderr)
        return 1
    try:
        manifest = export(args.problems, args.out, args.encoder, args.pooling,
                          args.batch, args.max_length)
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
