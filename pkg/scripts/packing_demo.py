"""Packing exponents of the zigzag family against 1 + theta / ((1 - theta)(s - 1))."""
import argparse

from assouad_graphs.packing import build_packing, target_gamma, verify_packing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, default=3.0)
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--variant", default="plain")
    ap.add_argument("--n", type=int, nargs="+", default=[10, 20, 40, 80, 160])
    args = ap.parse_args()
    print(f"target {target_gamma(args.s, args.theta):.4f}")
    print(f"{'n':>5} {'N':>6} {'#D':>10} {'min d / r':>10} {'gamma':>8}")
    for n in args.n:
        ps = build_packing(args.s, args.theta, n, variant=args.variant)
        au = verify_packing(ps, exact=False)
        print(f"{n:5d} {ps.N_n:6d} {au.cardinality:10d} "
              f"{au.min_pairwise_distance / ps.r_n:10.6f} {au.empirical_gamma:8.4f}")


if __name__ == "__main__":
    main()
