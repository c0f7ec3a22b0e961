"""Command-line entry point: ``espo-lab <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input (flags, files, configs,
failed invariant checks) and 2 for failures while computing.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import rate_fit, trace_report
from .baselines import BaselineConfig, crpo_config_from, crpo_run, pcrpo_run
from .cmdp import TabularCmdp, make_gridworld, make_random_cmdp, validate
from .espo import espo_run
from .oracle import solve_constrained_optimum

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
ALGOS = ("espo", "pcrpo", "crpo")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- helpers

def _cell(text: str, flag: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{flag}: expected 'x,y', got {text!r}") from None
    return x, y


def load_valid_cmdp(path) -> TabularCmdp:
    cmdp = io.load_cmdp(path)
    problems = validate(cmdp)
    if problems:
        raise io.FormatError(f"{path}: invalid instance: " + "; ".join(str(p) for p in problems[:5]))
    return cmdp


def run_config(algo: str, config, seed: int | None):
    """Config for ``algo``, with ``seed`` overriding the file's seed when given."""
    algo = algo.lower()
    if algo not in ALGOS:
        raise UsageError(f"--algo: expected one of {', '.join(ALGOS)}, got {algo!r}")
    if isinstance(config, BaselineConfig):
        if algo == "espo":
            raise UsageError("--config: a baseline config (has 'algorithm') cannot drive espo")
        if config.algorithm.lower() != algo:
            config = replace(config, algorithm=algo.upper())
    elif algo == "crpo":
        config = crpo_config_from(config)
    elif algo == "pcrpo":
        config = replace(config, adaptive_samples=False)
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def execute(algo: str, cmdp: TabularCmdp, config):
    if algo == "espo":
        return espo_run(cmdp, config)
    if algo == "pcrpo":
        return pcrpo_run(cmdp, config)
    return crpo_run(cmdp, config)


def _grid_job(job: dict) -> dict:
    cmdp = io.load_cmdp(job["env"])
    config = run_config(job["algo"], io.load_config(job["config"]), job["seed"])
    result = execute(job["algo"], cmdp, config)
    io.write_trace(result.trace, job["trace"])
    return {**job, "iterations": result.iterations, "transitions": result.trace[-1].cumulative_transitions
            if result.trace else result.initial_transitions}


# ---------------------------------------------------------------- subcommands

def cmd_generate_env(args) -> int:
    if args.kind == "random":
        cmdp = make_random_cmdp(args.seed, args.states, args.actions, args.branching or min(3, args.states),
                                args.budget_quantile, discount=args.discount, v_max=args.v_max)
    else:
        if args.budget is None:
            raise UsageError("--budget is required for grid instances")
        hazards = [_cell(h, "--hazard") for h in args.hazard]
        goal = _cell(args.goal, "--goal") if args.goal else (args.width - 1, args.height - 1)
        cmdp = make_gridworld(args.width, args.height, hazards, goal, args.budget, args.discount, args.slip)
    io.save_cmdp(cmdp, args.out)
    if args.oracle_out:
        io.save_optimum(solve_constrained_optimum(cmdp), args.oracle_out)
    return EXIT_OK


def cmd_run(args) -> int:
    cmdp = load_valid_cmdp(args.env)
    config = run_config(args.algo, io.load_config(args.config), args.seed)
    result = execute(args.algo.lower(), cmdp, config)
    io.write_trace(result.trace, args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    load_valid_cmdp(args.env)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for cfg_path in args.configs:
        io.load_config(cfg_path)  # fail fast on malformed files
        for algo in args.algo:
            run_config(algo, io.load_config(cfg_path), None)
            for seed in args.seeds:
                name = f"{Path(cfg_path).stem}_{algo.lower()}_seed{seed}.csv"
                jobs.append({"env": str(args.env), "config": str(cfg_path), "algo": algo.lower(),
                             "seed": seed, "trace": str(out / name)})
    if len({j["trace"] for j in jobs}) != len(jobs):
        raise UsageError("--configs: config file stems must be distinct")
    if args.workers == 1:
        rows = [_grid_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_grid_job, jobs))
    cols = ("trace", "algo", "config", "seed", "env", "iterations", "transitions")
    io.write_rows(out / "manifest.csv", cols, [[r[c] for c in cols] for r in rows])
    return EXIT_OK


def _plot_svg(path, series: dict[str, np.ndarray], ylabel: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise RuntimeError("--svg needs matplotlib (pip install 'artifact[plot]')") from None
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in series.items():
        ax.plot(np.arange(len(ys)), ys, label=label, linewidth=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_report(args) -> int:
    optimum = io.load_optimum(args.oracle)
    cmdp = load_valid_cmdp(args.env) if args.env else None
    if not 0.0 <= args.x_r <= 1.0:
        raise UsageError(f"--x-r: must lie in [0, 1], got {args.x_r}")
    eps_r, eps_c = args.eps_reward, args.eps_cost
    if cmdp is not None:
        eps_r = 0.1 * cmdp.value_bound if eps_r is None else eps_r
        eps_c = 0.05 * cmdp.value_bound if eps_c is None else eps_c
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary, gap_curves, by_T = [], {}, {}
    for path in args.traces:
        trace = io.read_trace(path)
        if not trace:
            raise io.FormatError(f"{path}: trace has no rows")
        rep = trace_report(trace, optimum, args.x_r, cmdp, eps_r, eps_c)
        stem = Path(path).stem
        weights = rep.weights if rep.weights is not None else [None] * len(trace)
        cum = rep.cumulative_before if rep.cumulative_before is not None else [None] * len(trace)
        io.write_rows(out / f"{stem}_gaps.csv",
                      ("t", "mode", "gap", "violation", "weight", "cum_transitions_before"),
                      [[r.t, r.mode.value, g, v, w, c] for r, g, v, w, c in
                       zip(trace, rep.gaps, rep.violations, weights, cum)])
        osc = rep.oscillation
        summary.append([stem, len(trace), rep.gaps[-1], rep.violations[-1], rep.weighted_gap,
                        rep.weighted_violation, osc.n_reward, osc.n_soft_no_conflict, osc.n_soft_conflict,
                        osc.n_cost, osc.t_in, osc.reentries, trace[-1].cumulative_transitions,
                        rep.first_hit_iteration, rep.first_hit_transitions])
        gap_curves[stem] = rep.gaps
        if rep.weighted_gap is not None:
            by_T.setdefault(len(trace), []).append(rep.weighted_gap)

    io.write_rows(out / "summary.csv",
                  ("trace", "T", "final_gap", "final_violation", "weighted_gap", "weighted_violation",
                   "n_reward", "n_soft_no_conflict", "n_soft_conflict", "n_cost", "t_in", "reentries",
                   "total_transitions", "first_hit_iteration", "first_hit_transitions"),
                  summary)
    if len(by_T) >= 4:
        medians = {T: float(np.median(v)) for T, v in sorted(by_T.items())}
        rows = [[T, g, len(by_T[T])] for T, g in medians.items()]
        try:
            fit = rate_fit(medians)
            rows.append(["slope", fit.slope, fit.intercept])
        except ValueError as exc:
            print(f"rate fit skipped: {exc}", file=sys.stderr)
        io.write_rows(out / "rate.csv", ("T", "median_weighted_gap", "n_runs"), rows)
    if args.svg:
        _plot_svg(out / "gaps.svg", gap_curves, "reward gap")
    print(json.dumps({"traces": len(args.traces), "out_dir": str(out)}))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all(quick=not args.full)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="espo-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate-env", help="write a random or gridworld instance file")
    g.add_argument("--kind", choices=("random", "grid"), default="random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--states", type=int, default=10)
    g.add_argument("--actions", type=int, default=5)
    g.add_argument("--branching", type=int)
    g.add_argument("--budget-quantile", type=float, default=0.3)
    g.add_argument("--discount", type=float, default=0.9)
    g.add_argument("--v-max", type=float, default=1.0)
    g.add_argument("--width", type=int, default=4)
    g.add_argument("--height", type=int, default=4)
    g.add_argument("--hazard", action="append", default=[], help="hazard cell 'x,y' (repeatable)")
    g.add_argument("--goal", help="goal cell 'x,y' (default: far corner)")
    g.add_argument("--budget", type=float)
    g.add_argument("--slip", type=float, default=0.1)
    g.add_argument("--out", required=True)
    g.add_argument("--oracle-out", help="also solve the LP and write the optimum here")
    g.set_defaults(func=cmd_generate_env)

    r = sub.add_parser("run", help="run one algorithm on one instance")
    r.add_argument("--algo", required=True, type=str.lower, choices=ALGOS)
    r.add_argument("--env", required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="overrides the config's seed")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    gr = sub.add_parser("grid", help="run configs x seeds in parallel")
    gr.add_argument("--env", required=True)
    gr.add_argument("--configs", nargs="+", required=True)
    gr.add_argument("--seeds", nargs="+", type=int, required=True)
    gr.add_argument("--algo", nargs="+", type=str.lower, choices=ALGOS, default=["espo"])
    gr.add_argument("--workers", type=int, default=1)
    gr.add_argument("--out-dir", required=True)
    gr.set_defaults(func=cmd_grid)

    rp = sub.add_parser("report", help="gap, mode and efficiency CSVs from trace files")
    rp.add_argument("--traces", nargs="+", required=True)
    rp.add_argument("--oracle", required=True)
    rp.add_argument("--env", help="instance file; enables first-hit sample counts")
    rp.add_argument("--x-r", type=float, default=0.5)
    rp.add_argument("--eps-reward", type=float, help="gap target (default 0.1 v_max/(1-gamma))")
    rp.add_argument("--eps-cost", type=float, help="violation target (default 0.05 v_max/(1-gamma))")
    rp.add_argument("--out-dir", default=".")
    rp.add_argument("--svg", action="store_true", help="also draw gaps.svg (needs matplotlib)")
    rp.set_defaults(func=cmd_report)

    v = sub.add_parser("verify", help="run the invariant checks")
    v.add_argument("--full", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
