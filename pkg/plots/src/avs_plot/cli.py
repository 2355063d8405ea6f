"""`avs-plot` command line: render experiment figures from a harness CSV."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, ValidationError, render_all, render_figure


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avs-plot", description=__doc__)
    parser.add_argument("--csv", required=True, help="experiment results CSV")
    parser.add_argument("--kind", choices=KINDS, help="figure kind to render")
    parser.add_argument("--out", help="output image path (single figure)")
    parser.add_argument("--all", action="store_true", help="render every figure kind")
    parser.add_argument("--out-dir", default="figures", help="output directory for --all")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.all:
            written = render_all(args.csv, args.out_dir)
            for path in written:
                print(f"wrote {path}")
        else:
            if not args.kind or not args.out:
                print("either --all or both --kind and --out are required", file=sys.stderr)
                return 2
            path = render_figure(FigureSpec(args.csv, args.kind, args.out))
            print(f"wrote {path}")
    except ValidationError as err:
        print(f"invalid CSV: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"cannot read input: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
