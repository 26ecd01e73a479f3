"""Entry point: surfmimo-plots <figure-id> --in sweep.csv --out figure.png"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURES, FigureError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="surfmimo-plots", description="Render result CSVs into figures"
    )
    parser.add_argument("figure_id", choices=sorted(FIGURES))
    parser.add_argument(
        "--in",
        dest="inputs",
        action="append",
        required=True,
        help="input CSV (repeatable)",
    )
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        render(FigureSpec(args.figure_id, tuple(args.inputs), args.out))
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
