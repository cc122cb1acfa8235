"""Exact lower tails W(eps, n) next to the Hoeffding bound, as CSV."""

import argparse
from fractions import Fraction

from cubeembed.cube_core import hoeffding_bound, tail_size


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=40)
    ap.add_argument("--eps", type=Fraction, nargs="+", default=[Fraction(1, 8), Fraction(1, 4), Fraction(1, 2)])
    args = ap.parse_args()
    print("n,eps,W,W_float,hoeffding")
    for n in range(1, args.n_max + 1):
        for e in args.eps:
            W = tail_size(e, n)
            print(f"{n},{e},{W.numerator}/{W.denominator},{float(W):.12g},{hoeffding_bound(e, n):.12g}")


if __name__ == "__main__":
    main()
