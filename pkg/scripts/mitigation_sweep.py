"""Sweep the mitigation success probability over p for several schedule sizes.

For each n the exact success probability is evaluated on a p-grid up to the
admissible maximum and compared against the closed-form floor; optionally a
seeded Monte-Carlo column is added for spot checks.

Usage: python3 scripts/mitigation_sweep.py --n 2 3 4 --points 12 --trials 0
"""

from __future__ import annotations

import argparse

from rwsim.mitigation import (
    SUCCESS,
    mitigate,
    p_max,
    success_probability_exact,
    success_probability_lower_bound,
    synthetic_flagged,
)
from rwsim.rng import SplitMix64, stream_seed


def monte_carlo(p: float, n: int, trials: int, seed: int) -> float:
    hits = 0
    for i in range(trials):
        rng = SplitMix64(stream_seed(seed, i))
        _, trace = mitigate(synthetic_flagged(p), n, rng=rng)
        hits += trace.outcome == SUCCESS
    return hits / trials


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[2, 3, 4])
    parser.add_argument("--points", type=int, default=12, help="p-grid size per n")
    parser.add_argument("--trials", type=int, default=0, help="Monte-Carlo trials (0 = skip)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    for n in args.n:
        floor = float(success_probability_lower_bound(n))
        top = float(p_max(n))
        print(f"# n={n}  levels={2 * n + 3}  floor={floor:.12f}  p_max={top:.12f}")
        header = f"{'p':>14} {'exact':>16} {'margin':>12}"
        if args.trials:
            header += f" {'mc':>8}"
        print(header)
        for j in range(1, args.points + 1):
            p = top * j / args.points
            exact = float(success_probability_exact(p, n))
            row = f"{p:14.10f} {exact:16.12f} {exact - floor:12.3e}"
            if args.trials:
                row += f" {monte_carlo(p, n, args.trials, args.seed):8.4f}"
            print(row)
        print()


if __name__ == "__main__":
    main()
