"""Similarity defect of M_hat against M_hat plus a diagonal, at shrinking targets.

    python scripts/absorb_trend.py --points 16 --level 10
"""

import argparse
import csv
import sys

import numpy as np

from multop.classify import atom_absorb_demo
from multop.measure import uniform


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--level", type=int, default=10)
    ap.add_argument("--p", type=float, default=3.0)
    args = ap.parse_args()
    entries = list((np.arange(args.points) + 0.5) / args.points)
    rows = atom_absorb_demo(uniform("line"), entries, args.level, args.p, targets=(0.4, 0.2, 0.1, 0.05, 0.025))
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


if __name__ == "__main__":
    main()
