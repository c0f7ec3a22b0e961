"""ESPO: three-mode NPG with gradient-conflict-driven sample sizes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .cmdp import TabularCmdp, ValueBundle, evaluate_probs
from .estimation import QEstimate, TRUNC_EPS, estimate_q, exact_estimate, rollout_cost, v_from_estimate
from .policy import (
    GradientPair,
    Mode,
    SoftmaxPolicy,
    conflict_mixture,
    exact_gradient,
    gradient_pair,
    npg_update,
    plugin_gradients,
    policy_from_logits,
    project_conflicting,
    decompose_in_span,
    DegenerateGradient,
)

EVAL_MODES = ("sampled", "exact")
PAIRINGS = ("main", "algorithm")


@dataclass
class EspoConfig:
    """Run settings.  ``x_c`` is always ``1 - x_r``; ``budget=None`` uses the instance budget."""

    iterations: int = 100
    learning_rate: float = 0.05
    base_sample_size: int = 16000
    zeta_plus: float = 0.1
    zeta_minus: float = -0.4
    h_plus: float = 0.5
    h_minus: float = -0.5
    decay_h_plus: bool = False
    decay_h_minus: bool = False
    decay_zeta_plus: bool = False
    decay_zeta_minus: bool = False
    x_r: float = 0.5
    budget: float | None = None
    seed: int = 0
    eval_mode: str = "sampled"
    confidence: float = 0.05
    adaptive_samples: bool = True
    pairing: str = "main"
    trunc_eps: float = TRUNC_EPS
    snapshot_every: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.base_sample_size < 1:
            raise ValueError(f"base_sample_size must be positive, got {self.base_sample_size}")
        if not self.zeta_plus >= 0:
            raise ValueError(f"zeta_plus must be >= 0, got {self.zeta_plus}")
        if not -1.0 < self.zeta_minus <= 0.0:
            raise ValueError(f"zeta_minus must lie in (-1, 0], got {self.zeta_minus}")
        if not self.h_minus <= 0.0 <= self.h_plus:
            raise ValueError(f"need h_minus <= 0 <= h_plus, got {self.h_minus}, {self.h_plus}")
        if not 0.0 <= self.x_r <= 1.0:
            raise ValueError(f"x_r must lie in [0, 1], got {self.x_r}")
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"eval_mode must be one of {EVAL_MODES}, got {self.eval_mode!r}")
        if self.pairing not in PAIRINGS:
            raise ValueError(f"pairing must be one of {PAIRINGS}, got {self.pairing!r}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must lie in (0, 1), got {self.confidence}")

    @property
    def x_c(self) -> float:
        return 1.0 - self.x_r

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EspoConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class IterationRecord:
    t: int
    mode: Mode
    sample_size_used: int
    v_bar_r: float
    v_bar_c: float
    h_plus: float
    h_minus: float
    zeta_plus: float
    zeta_minus: float
    grad_dot: float | None = None
    grad_norm_r: float | None = None
    grad_norm_c: float | None = None
    y_r: float | None = None
    y_c: float | None = None
    cumulative_transitions: int = 0
    x_clamped: bool = False


@dataclass
class RunResult:
    algorithm: str
    trace: list[IterationRecord]
    final_policy: SoftmaxPolicy
    snapshots: dict[int, np.ndarray]
    exact_v_reward: np.ndarray  # V_r of pi_0 .. pi_T
    exact_v_cost: np.ndarray
    initial_transitions: int
    budget: float
    x_r: float = 0.5
    eval_error_r: np.ndarray | None = None  # ||Q_r - Qbar_r||_2 for pi_0 .. pi_T
    eval_error_c: np.ndarray | None = None
    gap_series: np.ndarray | None = None
    violation_series: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def cumulative_before(self) -> np.ndarray:
        """Transitions consumed by the time each of pi_0 .. pi_T has been evaluated."""
        return np.array([self.initial_transitions] + [r.cumulative_transitions for r in self.trace], dtype=np.int64)


# ---------------------------------------------------------------- primitives

def classify_mode(v_bar_c: float, b: float, h_plus: float, h_minus: float) -> str:
    if v_bar_c > b + h_plus:
        return "COST"
    if v_bar_c < b + h_minus:
        return "REWARD"
    return "SOFT"


def decay_slack_and_penalty(h_plus, h_minus, zeta_plus, zeta_minus, T: int, flags=(False, False, False, False)):
    """Apply ``q <- q - q/T`` to each enabled quantity; infinities pass through.

    ``flags`` order is (h_plus, h_minus, zeta_plus, zeta_minus).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    out = []
    for q, on in zip((h_plus, h_minus, zeta_plus, zeta_minus), flags):
        out.append(q - q / T if on and math.isfinite(q) else q)
    return tuple(out)


def adjust_sample_size(base: int, zeta: float, min_size: int = 0) -> tuple[int, bool]:
    """``round(X + X zeta)`` from the fixed base, clamped at ``min_size``."""
    size = int(math.floor(base + base * zeta + 0.5))
    if size < min_size:
        return int(min_size), True
    return size, False


def evaluation_seed(run_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(run_seed), int(index)]).generate_state(1)[0])


# ---------------------------------------------------------------- the loop

@dataclass
class EspoState:
    t: int
    policy: SoftmaxPolicy
    bundle: ValueBundle
    estimate: QEstimate
    v_bar_r: float
    v_bar_c: float
    sample_size: int
    h_plus: float
    h_minus: float
    zeta_plus: float
    zeta_minus: float
    cumulative_transitions: int


def evaluate_policy(cmdp: TabularCmdp, policy: SoftmaxPolicy, sample_size: int, eval_mode: str,
                    run_seed: int, index: int, eps: float = TRUNC_EPS):
    """Exact bundle plus the (sampled or exact) estimate the algorithm acts on."""
    bundle = evaluate_probs(cmdp, policy.probs)
    if eval_mode == "exact":
        est = exact_estimate(cmdp, bundle, sample_size, eps)
    else:
        est = estimate_q(cmdp, policy, sample_size, evaluation_seed(run_seed, index), eps)
    v_r, v_c = v_from_estimate(est, policy, cmdp.initial_dist)
    return bundle, est, v_r, v_c


def initial_state(cmdp: TabularCmdp, config: EspoConfig, initial_logits=None) -> tuple[EspoState, bool]:
    S, A = cmdp.num_states, cmdp.num_actions
    w0 = np.zeros((S, A)) if initial_logits is None else np.asarray(initial_logits, dtype=float)
    policy = policy_from_logits(w0)
    size, clamped = adjust_sample_size(config.base_sample_size, 0.0, rollout_cost(cmdp, config.trunc_eps))
    bundle, est, v_r, v_c = evaluate_policy(cmdp, policy, size, config.eval_mode, config.seed, 0, config.trunc_eps)
    state = EspoState(0, policy, bundle, est, v_r, v_c, size, config.h_plus, config.h_minus,
                      config.zeta_plus, config.zeta_minus, est.transitions_consumed)
    return state, clamped


def soft_gradients(cmdp: TabularCmdp, state: EspoState, eval_mode: str) -> GradientPair:
    if eval_mode == "exact":
        g_r = exact_gradient(cmdp, state.policy, state.bundle, "reward")
        g_c = exact_gradient(cmdp, state.policy, state.bundle, "cost")
    else:
        g_r, g_c = plugin_gradients(cmdp, state.policy, state.bundle.visitation,
                                    state.estimate.q_bar_r, state.estimate.q_bar_c)
    return gradient_pair(g_r, g_c)


def _soft_update_rule(pair: GradientPair, config: EspoConfig):
    """Pick the soft-region exponent weights under the configured pairing."""
    if config.pairing == "main":
        return conflict_mixture(pair, config.x_r, config.x_c)
    # Swapped pairing: projection when aligned, weighted sum under conflict.
    mode = Mode.SOFT_CONFLICT if (pair.conflict and not pair.degenerate) else Mode.SOFT_NO_CONFLICT
    if mode is Mode.SOFT_CONFLICT or pair.degenerate:
        return mode, (config.x_r, config.x_c), None
    g = project_conflicting(pair.g_reward, pair.g_cost_descent, config.x_r, config.x_c)
    try:
        span = decompose_in_span(g, pair.g_reward, pair.g_cost_descent)
    except DegenerateGradient:
        return mode, (config.x_r, config.x_c), None
    return mode, (span.y_r, span.y_c), span


def espo_step(state: EspoState, cmdp: TabularCmdp, config: EspoConfig) -> tuple[EspoState, IterationRecord]:
    b = cmdp.budget if config.budget is None else config.budget
    T = max(config.iterations, 1)
    hp, hm, zp, zm = decay_slack_and_penalty(
        state.h_plus, state.h_minus, state.zeta_plus, state.zeta_minus, T,
        (config.decay_h_plus, config.decay_h_minus, config.decay_zeta_plus, config.decay_zeta_minus),
    )
    region = classify_mode(state.v_bar_c, b, hp, hm)
    pair = None
    span = None
    weights = (config.x_r, config.x_c)
    if region == "COST":
        mode, zeta = Mode.COST, zm
    elif region == "REWARD":
        mode, zeta = Mode.REWARD, zm
    else:
        pair = soft_gradients(cmdp, state, config.eval_mode)
        mode, weights, span = _soft_update_rule(pair, config)
        zeta = zp if mode is Mode.SOFT_CONFLICT else zm

    if config.adaptive_samples:
        size, clamped = adjust_sample_size(config.base_sample_size, zeta, rollout_cost(cmdp, config.trunc_eps))
    else:
        size, clamped = adjust_sample_size(config.base_sample_size, 0.0, rollout_cost(cmdp, config.trunc_eps))

    # span weights need not be convex, so they always use the general weighted exponent
    update_mode = Mode.SOFT_CONFLICT if span is not None else mode
    new_policy = npg_update(state.policy, state.estimate.q_bar_r, state.estimate.q_bar_c, update_mode, weights,
                            config.learning_rate, cmdp.discount)
    bundle, est, v_r, v_c = evaluate_policy(cmdp, new_policy, size, config.eval_mode, config.seed,
                                            state.t + 1, config.trunc_eps)
    cumulative = state.cumulative_transitions + est.transitions_consumed
    record = IterationRecord(
        t=state.t,
        mode=mode,
        sample_size_used=size,
        v_bar_r=state.v_bar_r,
        v_bar_c=state.v_bar_c,
        h_plus=hp,
        h_minus=hm,
        zeta_plus=zp,
        zeta_minus=zm,
        grad_dot=None if pair is None else pair.dot,
        grad_norm_r=None if pair is None else pair.norm_reward,
        grad_norm_c=None if pair is None else pair.norm_cost,
        y_r=None if span is None else span.y_r,
        y_c=None if span is None else span.y_c,
        cumulative_transitions=cumulative,
        x_clamped=clamped,
    )
    new_state = EspoState(state.t + 1, new_policy, bundle, est, v_r, v_c, size, hp, hm, zp, zm, cumulative)
    return new_state, record


def _collect(algorithm, cmdp, config, step, initial_logits=None) -> RunResult:
    state, _ = initial_state(cmdp, config, initial_logits)
    T = config.iterations
    trace: list[IterationRecord] = []
    snapshots: dict[int, np.ndarray] = {}
    v_r, v_c, err_r, err_c = (np.empty(T + 1) for _ in range(4))
    every = config.snapshot_every
    initial = state.cumulative_transitions

    def log(t):
        v_r[t], v_c[t] = state.bundle.v_reward_rho, state.bundle.v_cost_rho
        err_r[t] = np.linalg.norm(state.bundle.q_reward - state.estimate.q_bar_r)
        err_c[t] = np.linalg.norm(state.bundle.q_cost - state.estimate.q_bar_c)
        if every and (t % every == 0 or t == T):
            snapshots[t] = np.array(state.policy.logits)

    for t in range(T):
        log(t)
        state, rec = step(state, cmdp, config)
        trace.append(rec)
    log(T)
    b = cmdp.budget if config.budget is None else config.budget
    return RunResult(algorithm, trace, state.policy, snapshots, v_r, v_c, initial, float(b), config.x_r,
                     eval_error_r=err_r, eval_error_c=err_c)


def espo_run(cmdp: TabularCmdp, config: EspoConfig, initial_logits=None) -> RunResult:
    """Run ``config.iterations`` ESPO steps from the given (default uniform) policy."""
    name = "ESPO" if config.adaptive_samples else "PCRPO"
    return _collect(name, cmdp, config, espo_step, initial_logits)


def pcrpo_config(config: EspoConfig) -> EspoConfig:
    return replace(config, adaptive_samples=False)


# ---------------------------------------------------------------- output distribution

class NoRewardIterations(ValueError):
    pass


def iteration_weight(record: IterationRecord, x_r: float) -> float:
    if record.mode is Mode.REWARD:
        return 1.0
    if record.mode is Mode.COST:
        return 0.0
    if record.y_r is not None:
        # only the swapped pairing can produce a negative coefficient here
        return max(record.y_r, 0.0)
    return x_r


def weighted_output_distribution(trace, x_r: float = 0.5) -> np.ndarray:
    """Probability over iterations: 1 (reward), x_r (soft aligned), y_r (soft conflict), 0 (cost)."""
    w = np.array([iteration_weight(r, x_r) for r in trace], dtype=float)
    total = w.sum()
    if w.size == 0 or total <= 0.0:
        raise NoRewardIterations("no reward-optimizing iterations in trace")
    return w / total
