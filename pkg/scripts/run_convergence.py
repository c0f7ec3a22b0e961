"""Weighted reward gap of exact-evaluation ESPO versus horizon T, with a log-log rate fit.

    python scripts/run_convergence.py --out results/convergence.csv
"""

import argparse
import csv

import numpy as np

from espo_lab import EspoConfig, espo_run, make_random_cmdp, solve_constrained_optimum
from espo_lab.analysis import rate_fit, weighted_gap


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--states", type=int, default=10)
    p.add_argument("--actions", type=int, default=5)
    p.add_argument("--discount", type=float, default=0.9)
    p.add_argument("--v-max", type=float, default=10.0)
    p.add_argument("--slack-scale", type=float, default=0.05, help="h+ = scale * v_max sqrt(SA) / ((1-g)^1.5 sqrt(T))")
    p.add_argument("--horizons", type=int, nargs="+", default=[256, 1024, 4096, 16384])
    p.add_argument("--out", default="convergence.csv")
    args = p.parse_args()

    S, A, g, vm = args.states, args.actions, args.discount, args.v_max
    cmdps = [make_random_cmdp(i, S, A, 3, 0.2, discount=g, v_max=vm) for i in range(args.instances)]
    optima = [solve_constrained_optimum(c) for c in cmdps]
    rows, medians = [], {}
    for T in args.horizons:
        eta = (1 - g) ** 1.5 / np.sqrt(S * A * T)
        h = args.slack_scale * vm * np.sqrt(S * A) / ((1 - g) ** 1.5 * np.sqrt(T))
        cfg = EspoConfig(iterations=T, learning_rate=eta, h_plus=h, h_minus=-h, decay_h_plus=True,
                         decay_h_minus=True, eval_mode="exact", base_sample_size=10**8, snapshot_every=0)
        gaps = []
        for i, (cmdp, opt) in enumerate(zip(cmdps, optima)):
            run = espo_run(cmdp, cfg)
            gap = weighted_gap(run, opt)
            gaps.append(gap)
            rows.append([T, i, gap, max(0.0, run.exact_v_cost[-1] - cmdp.budget), run.trace[-1].h_plus])
        medians[T] = float(np.median(gaps))
        print(f"T={T:6d}  median weighted gap {medians[T]:.4f}", flush=True)
    fit = rate_fit(medians)
    print(f"slope {fit.slope:.3f} (ideal -0.5)")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "instance", "weighted_gap", "final_violation", "h_plus_T"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
