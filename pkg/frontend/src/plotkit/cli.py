"""Command-line entry point: ``plot <kind> <csv...> -o <file>``.

Exit codes: 0 on success, 1 on any validation or I/O failure (unknown kind,
missing file, header mismatch, empty CSV).  No output file is written unless
rendering succeeds.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure from the lab's CSV artifacts.",
    )
    parser.add_argument("kind", help=f"figure kind; one of: {', '.join(KINDS)}")
    parser.add_argument("csv", nargs="+", help="input CSV file(s)")
    parser.add_argument("-o", "--output", required=True,
                        help="output image path (.svg, .png, .pdf)")
    parser.add_argument("--title", default=None)
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    parser.add_argument("--label", action="append", default=None,
                        help="legend label, once per input CSV")
    parser.add_argument("--logy", action="store_true",
                        help="force a log scale on the y axis")
    parser.add_argument("--dpi", type=int, default=120)
    parser.add_argument("--width", type=float, default=6.4,
                        help="figure width in inches")
    parser.add_argument("--height", type=float, default=4.4,
                        help="figure height in inches")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; fold into 1
        code = exc.code
        return 0 if code in (0, None) else 1
    try:
        spec = FigureSpec(
            inputs=list(args.csv),
            kind=args.kind,
            output=args.output,
            title=args.title,
            xlabel=args.xlabel,
            ylabel=args.ylabel,
            logy=args.logy or None,
            figsize=(args.width, args.height),
            dpi=args.dpi,
            labels=list(args.label) if args.label else [],
        )
        out = render(spec)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
