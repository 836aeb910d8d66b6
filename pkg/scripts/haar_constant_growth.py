"""Unconditional-constant lower estimates of the Haar system as the tree deepens.

    python scripts/haar_constant_growth.py --max-level 7
"""

import argparse
import csv
import sys

from multop.haar import build_haar, estimate_unconditional_constant
from multop.measure import MeasureSpec, NonatomicPart, uniform

MEASURES = {
    "lebesgue": uniform("line"),
    "ramp": MeasureSpec("line", nonatomic=NonatomicPart(4, {j: float(j) for j in range(1, 17)})),
    "plane": uniform("plane"),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-level", type=int, default=7)
    ap.add_argument("--budget", type=int, default=16)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["measure", "p", "level", "estimate"])
    for name, m in MEASURES.items():
        for p in (1.5, 2.0, 3.0, 4.0):
            for L in range(1, args.max_level + 1):
                b = build_haar(m, L, p)
                w.writerow([name, p, L, estimate_unconditional_constant(b, budget=args.budget, seed=args.seed)])


if __name__ == "__main__":
    main()
