"""Scan the brickwork all-zeros frequency against the per-qubit retry budget.

Each budget b should land near (1 - 2^-(b+1))^|M| because every pattern
measurement is a fair coin; the table reports empirical frequency, the
analytic value, and the minimum conditioned output fidelity against the
one-shot projection oracle.

Usage: python3 scripts/brickwork_budget_scan.py --rows 2 --cols 5 --trials 400
"""

from __future__ import annotations

import argparse

import numpy as np

from rwsim.gates import H
from rwsim.mbqc import (
    BrickworkSpec,
    MeasurementPattern,
    build_brickwork,
    mbqc_run_rewind,
    postselect_pattern_zero,
)
from rwsim.rng import SplitMix64, stream_seed
from rwsim.statevector import apply_gate


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=2)
    parser.add_argument("--cols", type=int, default=5)
    parser.add_argument("--budgets", type=int, nargs="+", default=[0, 1, 2, 3, 5])
    parser.add_argument("--trials", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = BrickworkSpec(args.rows, args.cols)
    base = build_brickwork(spec)
    pattern = MeasurementPattern.identity(spec)
    measured = [q for q, _ in pattern.entries]
    rotated = base
    for q in measured:
        rotated = apply_gate(rotated, H, (q,))
    _, oracle = postselect_pattern_zero(rotated, measured)

    print(f"# grid {args.rows}x{args.cols}, |M|={len(measured)}, trials={args.trials}")
    print(f"{'budget':>6} {'freq':>8} {'analytic':>10} {'min_fidelity':>14}")
    for budget in args.budgets:
        zeros = 0
        fid_min = 1.0
        for i in range(args.trials):
            rng = SplitMix64(stream_seed(args.seed + budget, i))
            out, all_zero = mbqc_run_rewind(base, pattern, budget, rng)
            if all_zero:
                zeros += 1
                fid_min = min(fid_min, float(abs(np.vdot(oracle.amps, out.amps)) ** 2))
        analytic = (1.0 - 2.0 ** -(budget + 1)) ** len(measured)
        print(
            f"{budget:6d} {zeros / args.trials:8.4f} {analytic:10.6f} "
            f"{fid_min if zeros else float('nan'):14.12f}"
        )


if __name__ == "__main__":
    main()
