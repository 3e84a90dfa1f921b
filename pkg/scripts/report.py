"""Text summaries of finished runs (no plotting).

    python scripts/report.py results/desk

Prints the covariance-error table, kriging error and step times as mean(std)
per method and range, and the taper-sweep window where tapering beats S1 on
both error and step-2 time.
"""
import argparse
import csv
import os
from collections import defaultdict

import numpy as np


def read(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def cov_error(path):
    table = defaultdict(dict)
    for row in read(path):
        table[(row["method"], float(row["nu"]))][float(row["range"])] = float(row["epsilon"])
    ranges = sorted({r for v in table.values() for r in v})
    print("covariance error")
    print(f"{'method':<14}{'nu':>4}" + "".join(f"{r:>11g}" for r in ranges))
    for (method, nu), vals in sorted(table.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        cells = "".join(f"{vals[r]:>11.3g}" if r in vals else f"{'-':>11}" for r in ranges)
        print(f"{method:<14}{nu:>4g}" + cells)
    print()


def kriging(path):
    rows = read(path)
    print("kriging error and step times, mean(std); times in ms")
    print(f"{'method':<14}{'nu':>4}{'range':>7}{'n':>4}{'error':>22}{'step 1':>16}{'step 2':>16}{'step 3':>16}")
    for row in rows:
        def ms(key):
            return f"{1e3 * float(row[key + '_mean']):.1f}({1e3 * float(row[key + '_std']):.1f})"

        err = f"{float(row['kriging_error_mean']):.3g}({float(row['kriging_error_std']):.2g})"
        print(f"{row['method']:<14}{float(row['nu']):>4g}{float(row['range']):>7g}{row['replicates']:>4}"
              f"{err:>22}{ms('t_step1'):>16}{ms('t_step2'):>16}{ms('t_step3'):>16}")
    print()


def taper_sweep(path):
    rows = read(path)
    by = defaultdict(list)
    for row in rows:
        by[(float(row["nu"]), float(row["range"]))].append(row)
    for (nu, range_), block in sorted(by.items()):
        thetas = sorted({float(r["theta"]) for r in block})
        err = np.array([np.mean([float(r["kriging_error_taper"]) for r in block if float(r["theta"]) == t])
                        for t in thetas])
        t2 = np.array([np.median([float(r["t_step2_taper"]) for r in block if float(r["theta"]) == t])
                       for t in thetas])
        s1_err = np.mean([float(r["kriging_error_s1"]) for r in block])
        s1_t2 = np.median([float(r["t_step2_s1"]) for r in block])
        win = np.array(thetas)[(err < s1_err) & (t2 < s1_t2)]
        print(f"taper sweep nu={nu:g} range={range_:g}: s1 error {s1_err:.3g}, s1 step 2 {1e3 * s1_t2:.1f} ms")
        print(f"  taper error {err[0]:.3g} at theta {thetas[0]:g} down to {err[-1]:.3g} at theta {thetas[-1]:g}")
        print("  better and faster than s1: " + (f"theta {win.min():g} to {win.max():g}" if win.size else "none"))
    print()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("root", help="directory written by run_all.py")
    args = ap.parse_args()
    for sub, fname, fn in (("cov-error", "cov_error.csv", cov_error),
                           ("kriging-bench", "kriging_bench_summary.csv", kriging),
                           ("taper-sweep", "taper_sweep.csv", taper_sweep)):
        path = os.path.join(args.root, sub, fname)
        if os.path.exists(path):
            fn(path)


if __name__ == "__main__":
    main()
