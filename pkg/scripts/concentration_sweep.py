"""Count failures of the concentration implication for random sets.

For each (n, eps) cell, draw sets of measure at least W(eps, n) and compare the
measure of the floor(eps n) and ceil(eps n) neighbourhoods with 1 - W(eps, n).
Prints a CSV table to stdout.
"""

import argparse
import csv
import math
import sys
from fractions import Fraction

from cubeembed.cube_core import neighborhood_radius, random_subset_of_size, tail_size


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = csv.writer(sys.stdout)
    out.writerow(["n", "eps", "floor_radius", "floor_failures", "ceil_radius", "ceil_failures", "trials"])
    for n in range(1, args.n_max + 1):
        for eps in (Fraction(1, 8), Fraction(1, 4), Fraction(3, 8), Fraction(1, 2)):
            W = tail_size(eps, n)
            lo = math.ceil(W * 2**n)
            fl, ce = math.floor(eps * n), math.ceil(eps * n)
            bad_floor = bad_ceil = 0
            for t in range(args.trials):
                s = args.seed * 1_000_003 + t
                D = random_subset_of_size(n, lo + s % (2**n - lo + 1), s)
                bad_floor += neighborhood_radius(D, fl).measure() < 1 - W
                bad_ceil += neighborhood_radius(D, ce).measure() < 1 - W
            out.writerow([n, eps, fl, bad_floor, ce, bad_ceil, args.trials])


if __name__ == "__main__":
    main()
