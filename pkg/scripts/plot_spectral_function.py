"""
Plot the spectral function written by `main.py specfun`.

Reads specfun.csv, breaks the curve at the unperturbed eigenvalues and
optionally draws the level tan(phi/2) and the eigenvalues from spectrum.csv.

Usage:
    python scripts/plot_spectral_function.py data/salidas/specfun.csv
    python scripts/plot_spectral_function.py specfun.csv --spectrum spectrum.csv --phi 0.5
    python scripts/plot_spectral_function.py specfun.csv --clip 20 --out specfun.png
"""

import argparse
import math
import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from scatterer.export import read_csv


def break_at_poles(lams: np.ndarray, values: np.ndarray, clip: float):
    """Clipped values and grid with NaN inserted where F drops across a pole."""
    out = np.clip(values, -clip, clip)
    jumps = np.flatnonzero(np.diff(out) < -clip)
    return np.insert(out, jumps + 1, np.nan), np.insert(lams, jumps + 1, np.nan)


def main():
    parser = argparse.ArgumentParser(description="Plot F(lambda) from a specfun CSV")
    parser.add_argument("specfun", help="CSV written by `main.py specfun`")
    parser.add_argument("--spectrum", help="CSV written by `main.py spectrum`")
    parser.add_argument("--phi", type=float, help="Draw the level tan(phi/2)")
    parser.add_argument("--clip", type=float, default=10.0, help="Vertical clip for the plot")
    parser.add_argument("--out", help="Output image (default: next to the CSV)")
    args = parser.parse_args()

    frame = read_csv(args.specfun)
    values, lams = break_at_poles(frame["lambda"].to_numpy(), frame["F"].to_numpy(), args.clip)

    fig, ax = plt.subplots(figsize=(10, 5))
    ax.plot(lams, values, linewidth=0.8, label="F(lambda)")
    ax.axhline(0.0, color="grey", linewidth=0.5)

    if args.phi is not None:
        level = math.tan(args.phi / 2.0)
        ax.axhline(level, color="tab:red", linestyle="--", linewidth=0.8, label=f"tan(phi/2) = {level:.3g}")
        if args.spectrum:
            spectrum = read_csv(args.spectrum)
            shown = spectrum[spectrum["lambda_k"].between(lams[0], np.nanmax(lams))]
            ax.plot(shown["lambda_k"], np.full(len(shown), level), "o", color="tab:red", markersize=3)

    ax.set_xlabel("lambda")
    ax.set_ylabel("F")
    ax.set_ylim(-args.clip, args.clip)
    ax.legend(loc="upper right")

    out = Path(args.out) if args.out else Path(args.specfun).with_suffix(".png")
    plt.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    print(f"Plot saved -> {out}")


if __name__ == "__main__":
    main()
