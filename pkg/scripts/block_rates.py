"""Per-level Haar block norms against their geometric rates.

    python scripts/block_rates.py --level 10 --p 3
"""

import argparse
import csv
import sys

from multop.decompose import block_norm_table, head_rate, tail_rate
from multop.dyadic import Ambient
from multop.measure import uniform


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=int, default=10)
    ap.add_argument("--p", type=float, default=3.0)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["ambient", "n", "block_norm", "rate", "ratio"])
    for amb in (Ambient.LINE, Ambient.PLANE):
        head, tails = block_norm_table(uniform(amb), args.p, args.level, 0)
        w.writerow([amb.value, 0, head, head_rate(0, amb), head / head_rate(0, amb)])
        for n, v in tails.items():
            w.writerow([amb.value, n, v, tail_rate(n, amb), v / tail_rate(n, amb)])


if __name__ == "__main__":
    main()
