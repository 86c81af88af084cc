"""Fold the Takagi graph into K nested rectangles and verify the result."""
import argparse
import json

from assouad_graphs.folding import run_folding, verify_fold
from assouad_graphs.funcspace import TakagiSpec, measure_holder_witness, sample_function


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--theta0", type=float, default=0.3)
    ap.add_argument("--K", type=int, default=2)
    ap.add_argument("--pairs", type=int, default=20_000)
    args = ap.parse_args()
    spec = TakagiSpec(2 ** -0.5, 2.0, 1e-15)
    f = sample_function(spec, 0.0, 1.0, 2 ** 18 + 1)
    w = measure_holder_witness(spec, 0.5)
    print(f"witness: C = {w.C_upper:.4f}, c = {w.c_lower:.4f}")
    ff = run_folding(f, w, args.theta0, args.K)
    for k, sq in enumerate(ff.plan.squares, 1):
        print(f"square {k}: m = {sq.m:.12f}, delta = {sq.delta:.3e}, "
              f"reflections = {ff.reflection_counts[k - 1]}")
    rep = verify_fold(ff, w, [0.2, args.theta0, 0.4], n_pairs=args.pairs)
    for c in rep.checks:
        print(c.name, "ok" if c.passed else "FAIL", json.dumps(
            {k: v for k, v in c.detail.items() if k in ("theta", "square", "max_ratio",
                                                         "min_osc", "required", "count")}))


if __name__ == "__main__":
    main()
