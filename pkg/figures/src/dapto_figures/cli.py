"""`render` entry point: one figure per invocation from a results or toy CSV."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render", description="Render benchmark figures from a dapto CSV."
    )
    parser.add_argument("--csv", required=True, help="results or toy-walkthrough CSV")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output path; .png and .svg are written")
    parser.add_argument("--method", help="filter to one method")
    parser.add_argument("--degree", type=int, help="filter to one DGP degree")
    parser.add_argument("--nu", type=float, help="filter to one mixture weight")
    parser.add_argument("--k", type=int, help="filter to one reweighting round count")
    parser.add_argument("--n-train", type=int, help="filter to one training size")
    parser.add_argument("--no-bands", action="store_true", help="disable standard-error bands")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        csv=args.csv,
        kind=args.kind,
        out=args.out,
        bands=not args.no_bands,
        method=args.method,
        degree=args.degree,
        nu=args.nu,
        k=args.k,
        n_train=args.n_train,
    )
    try:
        paths, _ = render(spec)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
