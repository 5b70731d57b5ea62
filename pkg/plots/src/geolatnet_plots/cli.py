"""`geolatnet-plots <kind> --in DIR --out FILE` command-line entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, PlotsError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolatnet-plots",
        description="Render static report figures from a geolatnet run directory",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="run_dir", required=True, help="fit/predict output directory")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--burnin", type=int, default=0, help="drop iterations <= burnin (trace)")
    parser.add_argument("--thin", type=int, default=1, help="display thinning (trace)")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    spec = FigureSpec(
        kind=args.kind,
        run_dir=Path(args.run_dir),
        out_path=Path(args.out),
        burnin=args.burnin,
        thin=args.thin,
        title=args.title,
    )
    try:
        render(spec)
    except PlotsError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
