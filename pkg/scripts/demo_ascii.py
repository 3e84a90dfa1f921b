"""Render demo-predict grids as coarse ASCII shading for a quick look.

    python scripts/demo_ascii.py results/desk/demo-predict
"""
import argparse
import glob
import os

import numpy as np

from maternapprox.bench import read_grid

SHADES = " .:-=+*#%@"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("directory")
    ap.add_argument("--width", type=int, default=40)
    args = ap.parse_args()
    files = sorted(glob.glob(os.path.join(args.directory, "demo_*.txt")))
    fields = {os.path.basename(f)[5:-4]: read_grid(f)[0] for f in files}
    if not fields:
        raise SystemExit("no demo_*.txt files found")
    lo = min(v.min() for v in fields.values())
    hi = max(v.max() for v in fields.values())
    for name, values in fields.items():
        step = max(1, values.shape[1] // args.width)
        sub = values[::step, ::step]
        idx = np.clip(((sub - lo) / (hi - lo + 1e-300) * (len(SHADES) - 1)).round().astype(int), 0, len(SHADES) - 1)
        print(name)
        # first axis runs left to right on the page
        for col in idx.T[::-1]:
            print("".join(SHADES[i] for i in col))
        print()


if __name__ == "__main__":
    main()
