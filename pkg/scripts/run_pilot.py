#!/usr/bin/env python3
"""Regenerate the pilot-pinned thresholds in src/rmflab/pinned.py.

Runs the threshold-defining experiments at PILOT_SEED and prints a block
of constants to paste into pinned.py.  The sign-change probability pass is
the heavy one (the x = 1e5 interval walks to ~3e8); expect a long run.

Usage: python scripts/run_pilot.py [--workers K] [--only signprob|avgv|mertens]
"""

import argparse
import math
import time

from rmflab.models import ModelSpec
from rmflab.montecarlo import (
    ExperimentPlan,
    estimate_sign_change_prob,
    expected_v_table,
    x_ell_grid,
)
from rmflab.pinned import PILOT_SEED
from rmflab.sieve import mertens_trace


def pilot_signprob(workers: int) -> dict:
    xs = [10**3, 10**4, 10**5]
    n_interval = 8
    samples = 10**3
    biggest = int(math.exp(n_interval) * xs[-1])
    plan = ExperimentPlan(
        master_seed=PILOT_SEED, samples=samples, model=ModelSpec("rmf"),
        workers=workers, budget=biggest * samples + 1,
    )
    points = {}
    for x in xs:
        t0 = time.time()
        est = estimate_sign_change_prob(plan, x, n_interval)
        points[x] = (est.point, est.se)
        print(f"  signprob x={x}: {est.point:.4f} (se {est.se:.4f}) in {time.time()-t0:.0f}s")
    return points


def pilot_avg_v(workers: int) -> dict:
    xs = [x for x in x_ell_grid(0.01, 40) if 10**3 <= x <= 10**6]
    samples = 600
    plan = ExperimentPlan(
        master_seed=PILOT_SEED, samples=samples, model=ModelSpec("rmf"),
        workers=workers, budget=int(xs[-1]) * samples + 1,
    )
    table = expected_v_table(plan, xs)
    ratios = {}
    for x in xs:
        scale = math.log(math.log(x)) ** 0.51 / math.log(x)
        ratios[x] = table[x].point * scale
        print(f"  avg-v x={x:.4g}: EV={table[x].point:.3f} ratio={ratios[x]:.4f}")
    return ratios


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--only", choices=("signprob", "avgv", "mertens"), default=None)
    args = ap.parse_args()

    out = {}
    if args.only in (None, "mertens"):
        print("mertens census to 1e6 ...")
        tr = mertens_trace(10**6)
        out["MERTENS_1E6_CHANGES"] = tr.sign_change_count
        out["MERTENS_1E6_FINAL"] = tr.final_value
        print(f"  changes={tr.sign_change_count} final={tr.final_value}")
    if args.only in (None, "avgv"):
        print("averaged-V ratios on the x_ell grid ...")
        ratios = pilot_avg_v(args.workers)
        kappa = min(ratios.values())
        out["KAPPA_AVG_V"] = round(kappa, 6)
        out["AVG_V_PILOT_RATIOS"] = {f"{x:.6g}": round(r, 6) for x, r in ratios.items()}
    if args.only in (None, "signprob"):
        print("local sign-change probabilities (heavy) ...")
        points = pilot_signprob(args.workers)
        floor = min(p for p, _ in points.values())
        # margin for seed-to-seed fluctuation: well below any plausible rerun
        out["THETA_SIGNPROB"] = round(0.7 * floor, 6)
        out["SIGNPROB_PILOT_POINTS"] = {
            str(x): (round(p, 6), round(se, 6)) for x, (p, se) in points.items()
        }

    print("\n--- paste into src/rmflab/pinned.py ---")
    for key, val in out.items():
        print(f"{key} = {val!r}")


if __name__ == "__main__":
    main()
