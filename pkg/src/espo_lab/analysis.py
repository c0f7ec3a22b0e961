"""Reports computed from run traces: gaps, oscillation, sample efficiency, rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cmdp import TabularCmdp, evaluate_probs
from .espo import NoRewardIterations, RunResult, weighted_output_distribution
from .oracle import ConstrainedOptimum
from .policy import Mode, softmax_rows

RATE_FLOOR = 1e-12


@dataclass
class GapReport:
    gaps: np.ndarray  # V_r* - V_r(pi_t), t = 0 .. T
    violations: np.ndarray  # max(0, V_c(pi_t) - b)
    weighted_gap: float | None
    weighted_violation: float | None
    final_gap: float
    final_violation: float
    infeasible_reference: bool = False
    note: str = ""


@dataclass
class OscillationReport:
    n_reward: int
    n_soft_no_conflict: int
    n_soft_conflict: int
    n_cost: int
    t_in: int | None
    reentries: int
    n_reward_crpo: int | None = None

    @property
    def total(self) -> int:
        return self.n_reward + self.n_soft_no_conflict + self.n_soft_conflict + self.n_cost

    @property
    def n_soft(self) -> int:
        return self.n_soft_no_conflict + self.n_soft_conflict

    @property
    def stays_inside(self) -> bool:
        return self.reentries == 0

    @property
    def beats_crpo(self) -> bool | None:
        if self.n_reward_crpo is None:
            return None
        return self.n_reward + self.n_soft >= self.n_reward_crpo

    def shares(self) -> dict[str, float]:
        T = max(self.total, 1)
        return {
            "reward": self.n_reward / T,
            "soft_no_conflict": self.n_soft_no_conflict / T,
            "soft_conflict": self.n_soft_conflict / T,
            "cost": self.n_cost / T,
        }


@dataclass
class EfficiencyReport:
    algorithms: list[str]
    first_hit_transitions: list[float]  # inf when the target is never reached
    first_hit_iteration: list[int | None]
    eps_reward: float
    eps_cost: float
    eval_error: list[float | None] = field(default_factory=list)

    def ratio(self, num: str = "ESPO", den: str = "PCRPO") -> float:
        a = self.first_hit_transitions[self.algorithms.index(num)]
        b = self.first_hit_transitions[self.algorithms.index(den)]
        return a / b

    def reached(self, i: int) -> bool:
        return math.isfinite(self.first_hit_transitions[i])


def exact_series(run: RunResult, cmdp: TabularCmdp, recompute: bool = False):
    """Exact ``(V_r, V_c)`` of pi_0 .. pi_T, optionally re-derived from snapshots."""
    if not recompute:
        return run.exact_v_reward, run.exact_v_cost
    T = run.iterations
    missing = [t for t in range(T + 1) if t not in run.snapshots]
    if missing:
        raise ValueError(f"snapshots missing for {len(missing)} iterate(s); run with snapshot_every=1")
    v_r = np.empty(T + 1)
    v_c = np.empty(T + 1)
    for t in range(T + 1):
        b = evaluate_probs(cmdp, softmax_rows(run.snapshots[t]))
        v_r[t], v_c[t] = b.v_reward_rho, b.v_cost_rho
    return v_r, v_c


def gap_series(run: RunResult, cmdp: TabularCmdp, optimum: ConstrainedOptimum, recompute: bool = False) -> GapReport:
    v_r, v_c = exact_series(run, cmdp, recompute)
    gaps = optimum.optimal_reward_value - v_r
    viol = np.maximum(0.0, v_c - run.budget)
    note = "" if optimum.feasible else "reference is the cost-minimising policy (budget infeasible)"
    try:
        w = weighted_output_distribution(run.trace, run.x_r)
        wg = float(optimum.optimal_reward_value - w @ v_r[:-1])
        wv = float(w @ v_c[:-1] - run.budget)
    except NoRewardIterations:
        wg = wv = None
        note = (note + "; " if note else "") + "no reward-optimizing iterations"
    report = GapReport(gaps, viol, wg, wv, float(gaps[-1]), float(viol[-1]), not optimum.feasible, note)
    run.gap_series, run.violation_series = gaps, viol
    return report


def weighted_gap(run: RunResult, optimum: ConstrainedOptimum) -> float:
    w = weighted_output_distribution(run.trace, run.x_r)
    return float(optimum.optimal_reward_value - w @ run.exact_v_reward[:-1])


def mode_counts(modes: Sequence[Mode]):
    modes = [Mode(m) for m in modes]
    return {m: sum(1 for x in modes if x is m) for m in Mode}


def oscillation_from_modes(modes: Sequence[Mode], crpo_modes: Sequence[Mode] | None = None) -> OscillationReport:
    modes = [Mode(m) for m in modes]
    counts = mode_counts(modes)
    t_in = next((t for t, m in enumerate(modes) if m is not Mode.COST), None)
    reentries = 0 if t_in is None else sum(1 for m in modes[t_in:] if m is Mode.COST)
    n_crpo = None
    if crpo_modes is not None:
        n_crpo = sum(1 for m in crpo_modes if Mode(m) is Mode.REWARD)
    return OscillationReport(counts[Mode.REWARD], counts[Mode.SOFT_NO_CONFLICT], counts[Mode.SOFT_CONFLICT],
                             counts[Mode.COST], t_in, reentries, n_crpo)


def oscillation_report(espo: RunResult, crpo: RunResult | None = None) -> OscillationReport:
    if crpo is not None:
        if (crpo.iterations != espo.iterations or crpo.budget != espo.budget
                or crpo.exact_v_reward[0] != espo.exact_v_reward[0]
                or crpo.exact_v_cost[0] != espo.exact_v_cost[0]):
            raise ValueError("runs do not share instance, horizon and initialisation")
    return oscillation_from_modes([r.mode for r in espo.trace],
                                  None if crpo is None else [r.mode for r in crpo.trace])


def first_hit(gaps, violations, cumulative, eps_reward: float, eps_cost: float):
    """First iterate meeting both targets as ``(index, transitions)``; ``(None, inf)`` if never."""
    ok = (np.asarray(gaps) <= eps_reward) & (np.asarray(violations) <= eps_cost)
    if not ok.any():
        return None, math.inf
    k = int(np.argmax(ok))
    return k, float(cumulative[k])


def evaluation_error(run: RunResult) -> float | None:
    """Mode-weighted sum of ``||Q - Qbar||_2`` over the trace (zero in exact mode)."""
    if run.eval_error_r is None:
        return None
    total = 0.0
    x_r = run.x_r
    for t, rec in enumerate(run.trace):
        er, ec = run.eval_error_r[t], run.eval_error_c[t]
        if rec.mode is Mode.REWARD:
            total += er
        elif rec.mode is Mode.COST:
            total += ec
        elif rec.y_r is not None:
            total += rec.y_r * er + rec.y_c * ec
        else:
            total += x_r * er + (1.0 - x_r) * ec
    return float(total)


def efficiency_report(runs: Sequence[RunResult], cmdp: TabularCmdp, optimum: ConstrainedOptimum,
                      eps_reward: float, eps_cost: float) -> EfficiencyReport:
    if len(runs) < 2:
        raise ValueError("efficiency comparison needs at least two runs")
    names, hits, iters, errs = [], [], [], []
    for run in runs:
        rep = gap_series(run, cmdp, optimum)
        k, n = first_hit(rep.gaps, rep.violations, run.cumulative_before(), eps_reward, eps_cost)
        names.append(run.algorithm)
        hits.append(n)
        iters.append(k)
        errs.append(evaluation_error(run))
    return EfficiencyReport(names, hits, iters, eps_reward, eps_cost, errs)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    clamped: bool


def rate_fit(gap_at_T: dict) -> RateFit:
    """Least-squares line through ``(log T, log gap)``."""
    Ts = np.array(sorted(gap_at_T), dtype=float)
    if Ts.size < 4 or Ts[-1] / Ts[0] < 4.0:
        raise ValueError("rate fit needs >= 4 horizons spanning >= 2 octaves")
    gaps = np.array([gap_at_T[T] for T in sorted(gap_at_T)], dtype=float)
    clamped = bool(np.any(gaps <= 0.0))
    gaps = np.maximum(gaps, RATE_FLOOR)
    slope, intercept = np.polyfit(np.log(Ts), np.log(gaps), 1)
    return RateFit(float(slope), float(intercept), clamped)


# ---------------------------------------------------------------- trace-only reports

@dataclass
class TraceReport:
    """Report values derived from a trace file alone (``v_bar`` stands in for exact values)."""

    gaps: np.ndarray
    violations: np.ndarray
    weights: np.ndarray | None
    weighted_gap: float | None
    weighted_violation: float | None
    oscillation: OscillationReport
    cumulative_before: np.ndarray | None = None
    first_hit_iteration: int | None = None
    first_hit_transitions: float | None = None


def initial_transitions_from_trace(trace, cmdp: TabularCmdp, eps: float | None = None) -> int:
    """Bootstrap-evaluation cost, recovered from row 0's cumulative count and sample size."""
    from .estimation import TRUNC_EPS, transitions_for_budget

    first = trace[0]
    return first.cumulative_transitions - transitions_for_budget(cmdp, first.sample_size_used,
                                                                 TRUNC_EPS if eps is None else eps)


def trace_report(trace, optimum: ConstrainedOptimum, x_r: float = 0.5, cmdp: TabularCmdp | None = None,
                 eps_reward: float | None = None, eps_cost: float | None = None) -> TraceReport:
    if not trace:
        raise ValueError("empty trace")
    v_r = np.array([r.v_bar_r for r in trace])
    v_c = np.array([r.v_bar_c for r in trace])
    gaps = optimum.optimal_reward_value - v_r
    viol = np.maximum(0.0, v_c - optimum.budget)
    try:
        w = weighted_output_distribution(trace, x_r)
        wg, wv = float(optimum.optimal_reward_value - w @ v_r), float(w @ v_c - optimum.budget)
    except NoRewardIterations:
        w = wg = wv = None
    rep = TraceReport(gaps, viol, w, wg, wv, oscillation_from_modes([r.mode for r in trace]))
    if cmdp is not None:
        initial = initial_transitions_from_trace(trace, cmdp)
        rep.cumulative_before = np.array([initial] + [r.cumulative_transitions for r in trace[:-1]], dtype=np.int64)
        if eps_reward is not None and eps_cost is not None:
            k, n = first_hit(gaps, viol, rep.cumulative_before, eps_reward, eps_cost)
            rep.first_hit_iteration, rep.first_hit_transitions = k, n
    return rep
