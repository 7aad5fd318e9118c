"""Empirical check of the RCAS approximation guarantee against brute-force optima.

    python3 scripts/theorem_bound.py --instances 400 --max-positions 4 --max-types 3
"""
import argparse
import math

from rcas import brute_force_opt, run_rcas
from rcas.instances import concave_instance, coverage_instance

BOUND = 0.5 * (1 - 1 / math.e)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=400)
    ap.add_argument("--max-positions", type=int, default=4)
    ap.add_argument("--max-types", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ratios = []
    per_mode_wins = {"uc": 0, "apr": 0, "amr": 0}
    for i in range(args.instances):
        seed = args.seed + i
        n = 1 + seed % args.max_positions
        l = 1 + (seed // args.max_positions) % args.max_types
        inst = (coverage_instance if seed % 2 == 0 else concave_instance)(n, l, seed)
        _, opt = brute_force_opt(inst.objective, inst.costs, inst.budget)
        if opt <= 0:
            continue
        res = run_rcas(inst.objective, inst.costs, inst.budget)
        ratios.append(res.best.value / opt)
        per_mode_wins[res.best.mode.value] += 1

    ratios.sort()
    print(f"instances with OPT > 0: {len(ratios)}")
    print(f"worst ratio {ratios[0]:.4f}  median {ratios[len(ratios) // 2]:.4f}  bound {BOUND:.4f}")
    print(f"optimal (ratio 1) on {sum(r == 1.0 for r in ratios)} instances")
    print(f"below bound: {sum(r < BOUND for r in ratios)}")
    print("winning mode counts:", per_mode_wins)


if __name__ == "__main__":
    main()
