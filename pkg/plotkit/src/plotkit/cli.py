"""Command-line figure rendering.

    plotkit series --in runs/hahn_d2 --overlay d=2,t2=1 --out hahn.png
    plotkit floquet_map --in runs/floquet_long --out map.png
    plotkit histogram --in runs/floquet_long --logy --out sigma.png

Exit codes: 0 drawn (including a legitimately empty map), 2 bad usage
or unreadable/incompatible input.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureRequest, parse_overlay, render
from .io import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="render figures from simulation run directories")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, blurb in (("series", "echo response vs time"),
                        ("floquet_map", "thresholded matrix-element scatter"),
                        ("histogram", "quasienergy difference distribution")):
        p = sub.add_parser(kind, help=blurb)
        p.add_argument("--in", dest="inputs", action="append", required=True,
                       metavar="DIR", help="run directory (repeatable "
                       "for series)")
        p.add_argument("--out", default="figure.png",
                       help="image path (default figure.png)")
        p.add_argument("--logx", action="store_true")
        p.add_argument("--logy", action="store_true")
        if kind == "series":
            p.add_argument("--overlay", action="append", default=[],
                           metavar="SPEC", help="analytic curve, e.g. "
                           "d=2,t2=1 (repeatable)")
        if kind == "histogram":
            p.add_argument("--counts", action="store_true",
                           help="plot raw pair counts instead of the "
                           "normalized density")
    return parser


def build_request(argv) -> FigureRequest:
    args = _build_parser().parse_args(argv)
    overlays = tuple(parse_overlay(s) for s in getattr(args, "overlay", []))
    return FigureRequest(kind=args.kind, inputs=tuple(args.inputs),
                         overlays=overlays, logx=args.logx, logy=args.logy,
                         counts=getattr(args, "counts", False), out=args.out)


def main(argv=None) -> int:
    try:
        request = build_request(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        out = render(request)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
