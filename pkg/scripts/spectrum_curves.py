"""Finite-scale spectrum curves against the Hölder bound.

Prints theta, both estimators and (2 - alpha - theta) / (1 - theta) for the
Takagi function T_{2^-1/2, 2} and the Weierstrass function W_{7^-1/2, 7}.
"""
import argparse

import numpy as np

from assouad_graphs.covering import Holder, audit_upper_bound, resolution_ladders
from assouad_graphs.funcspace import TakagiSpec, WeierstrassSpec, sample_function


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2 ** 18 + 1)
    ap.add_argument("--centers", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    thetas = [0.05, 0.1, 0.2, 0.3, 0.4, 0.45]
    for spec in (TakagiSpec(2 ** -0.5, 2.0), WeierstrassSpec(7 ** -0.5, 7.0)):
        f = sample_function(spec, 0.0, 1.0, args.samples)
        centers = rng.uniform(0.05, 0.95, args.centers).tolist()
        rep = audit_upper_bound(f, Holder(spec.alpha), thetas,
                                lambda th: resolution_ladders(f, th), centers)
        print(spec.describe())
        print(f"{'theta':>6} {'max':>7} {'regr':>7} {'bound':>7}")
        for row in rep.rows:
            print(f"{row.theta:6.2f} {row.exponent:7.3f} {row.regression_exponent:7.3f} "
                  f"{row.bound:7.3f}")


if __name__ == "__main__":
    main()
