"""Plot BER curves from a results directory (needs the optional plot extra).

    python3 scripts/plot_csv.py results/fig4-desk --out fig4.png
"""

import argparse
import csv
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("directory")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for path in sorted(Path(args.directory).glob("*.csv")):
        with open(path) as f:
            rows = [r for r in csv.DictReader(f) if float(r["ber"]) > 0]
        ax.semilogy([float(r["snr_db"]) for r in rows], [float(r["ber"]) for r in rows], "o-", label=path.stem)
    ax.set_xlabel("Eb/N0 [dB]")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    out = args.out or str(Path(args.directory) / "ber.png")
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
