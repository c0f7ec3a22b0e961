"""Transitions consumed before first reaching the gap and violation targets: ESPO vs PCRPO.

    python scripts/run_efficiency.py --out results/efficiency.csv
"""

import argparse
import csv

import numpy as np

from espo_lab import EspoConfig, espo_run, make_random_cmdp, solve_constrained_optimum
from espo_lab.analysis import efficiency_report
from espo_lab.estimation import rollout_cost


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--sweeps", type=int, default=10, help="base sample size in rollouts per (s, a)")
    p.add_argument("--zeta-plus", type=float, default=0.1)
    p.add_argument("--zeta-minus", type=float, default=-0.4)
    p.add_argument("--out", default="efficiency.csv")
    args = p.parse_args()

    rows = []
    for inst in range(args.instances):
        cmdp = make_random_cmdp(inst, 5, 4, 2, 0.2, discount=0.8)
        opt = solve_constrained_optimum(cmdp)
        bound = cmdp.value_bound
        for seed in range(args.seeds):
            runs = [espo_run(cmdp, EspoConfig(
                iterations=args.iterations, learning_rate=0.1, base_sample_size=args.sweeps * rollout_cost(cmdp),
                zeta_plus=args.zeta_plus, zeta_minus=args.zeta_minus, h_plus=0.02 * bound, h_minus=-0.02 * bound,
                seed=seed, adaptive_samples=adaptive, snapshot_every=0)) for adaptive in (True, False)]
            rep = efficiency_report(runs, cmdp, opt, 0.1 * bound, 0.05 * bound)
            for name, it, n, err in zip(rep.algorithms, rep.first_hit_iteration, rep.first_hit_transitions,
                                        rep.eval_error):
                rows.append([inst, seed, name, "" if it is None else it, n, err])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "seed", "algorithm", "first_hit_iteration", "first_hit_transitions",
                     "aggregate_eval_error"])
        w.writerows(rows)
    for name in ("ESPO", "PCRPO"):
        hits = [r[4] for r in rows if r[2] == name]
        print(f"{name:6s} mean first-hit transitions {np.mean(hits):.0f}")


if __name__ == "__main__":
    main()
