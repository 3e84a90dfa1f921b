"""Run the four experiments in sequence into one results directory.

    python scripts/run_all.py --out results/desk
    python scripts/run_all.py --paper-scale --out results/paper --threads 4
"""
import argparse
import os
import sys
import time

from maternapprox.cli import main as cli

EXPERIMENTS = ("cov-error", "kriging-bench", "taper-sweep", "demo-predict")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--paper-scale", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="+", choices=EXPERIMENTS, default=EXPERIMENTS)
    args = ap.parse_args()

    status = 0
    for name in args.only:
        out = os.path.join(args.out, name)
        argv = [name, "--out", out, "--seed", str(args.seed), "--threads", str(args.threads),
                "--paper-scale" if args.paper_scale else "--desk"]
        start = time.perf_counter()
        code = cli(argv)
        print(f"{name}: exit {code} in {time.perf_counter() - start:.0f} s -> {out}")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
