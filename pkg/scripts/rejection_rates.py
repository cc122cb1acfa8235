"""Success rate of the rejection sampler as the rescaling range grows.

Also prints the expected number of undistorted k-cube copies in a Bernoulli
subset, which explains why wide ranges essentially never succeed at small N.
"""

import argparse
import math
from fractions import Fraction

from cubeembed.adversary import RandomSetRecipe, certify_no_copy, sample_set
from cubeembed.embedding import count_undistorted


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--delta", type=Fraction, default=Fraction(1, 20))
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--max-attempts", type=int, default=1000)
    args = ap.parse_args()
    print("r_max,expected_copies,certified,seeds")
    for r_max in range(1, args.n // args.k + 1):
        p = float(RandomSetRecipe.for_density(args.n, args.delta, 0).p)
        expected = sum(count_undistorted(args.k, args.n, r) for r in range(1, r_max + 1))
        # each unlabeled copy is counted once per symmetry of the k-cube
        expected *= p ** (2**args.k) / (2**args.k * math.factorial(args.k))
        ok = 0
        for seed in range(args.seeds):
            rec = RandomSetRecipe.for_density(
                args.n, args.delta, seed, mode="rejection", k=args.k, r_range=(1, r_max), max_attempts=args.max_attempts
            )
            res = sample_set(rec)
            if res.success and certify_no_copy(res.subset, args.k, (1, r_max)).status == "certified":
                ok += 1
        print(f"{r_max},{expected:.3f},{ok},{args.seeds}", flush=True)


if __name__ == "__main__":
    main()
