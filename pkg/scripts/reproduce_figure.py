"""Run one canned figure recipe and write CSVs plus a manifest.

    python3 scripts/reproduce_figure.py fig9 --scale desk --workers 4
"""

import argparse
import sys

from mimolab import harness, recipes


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("figure", choices=recipes.FIGURES)
    ap.add_argument("--scale", default="desk", choices=list(recipes.SCALES))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    specs = recipes.recipe(args.figure, args.scale, args.seed)
    out = args.out or f"results/{args.figure}-{args.scale}"
    result = harness.sweep(specs, out, workers=args.workers)
    for name, curve in result.curves.items():
        cells = "  ".join(f"{p.snr_db:g}:{p.ber:.2e}" for p in curve.points)
        print(f"{name:24s} {cells}")
    for name, err in result.errors.items():
        print(f"FAILED {name}: {err}", file=sys.stderr)
    print(f"results in {out}")
    return 1 if result.errors else 0


if __name__ == "__main__":
    sys.exit(main())
