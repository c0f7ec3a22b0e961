"""Invariant checks shared by the ``verify`` subcommand and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cmdp import TabularCmdp, evaluate_probs, make_random_cmdp, validate
from .espo import EspoConfig, adjust_sample_size, espo_run
from .baselines import pcrpo_run
from .oracle import solve_constrained_optimum
from .policy import Mode, exact_gradient, npg_multiplicative, npg_update, policy_from_logits, softmax_rows


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def finite_difference_gradient(cmdp: TabularCmdp, logits: np.ndarray, objective: str, step: float = 1e-5) -> np.ndarray:
    """Central differences of ``V(rho)`` in every logit coordinate."""
    grad = np.zeros_like(logits)
    for idx in np.ndindex(logits.shape):
        vals = []
        for sign in (1.0, -1.0):
            w = logits.copy()
            w[idx] += sign * step
            b = evaluate_probs(cmdp, softmax_rows(w))
            vals.append(b.v_reward_rho if objective == "reward" else b.v_cost_rho)
        grad[idx] = (vals[0] - vals[1]) / (2.0 * step)
    return grad


def gradient_relative_error(cmdp: TabularCmdp, logits: np.ndarray, step: float = 1e-5) -> float:
    policy = policy_from_logits(logits)
    bundle = evaluate_probs(cmdp, policy.probs)
    worst = 0.0
    for objective, sign in (("reward", 1.0), ("cost", -1.0)):
        analytic = exact_gradient(cmdp, policy, bundle, objective)
        numeric = sign * finite_difference_gradient(cmdp, logits, objective, step)
        worst = max(worst, np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12))
    return float(worst)


def check_gradients(n_instances: int = 30, seed: int = 0, tol: float = 1e-4, step: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_instances):
        S, A = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        cmdp = make_random_cmdp(int(rng.integers(1 << 30)), S, A, int(rng.integers(1, S + 1)), 0.5,
                                discount=float(rng.uniform(0.5, 0.95)))
        worst = max(worst, gradient_relative_error(cmdp, rng.normal(size=(S, A)), step))
    return CheckResult("gradient vs finite differences", worst <= tol,
                       f"max relative error {worst:.2e} over {n_instances} instances (tol {tol:g})")


def random_npg_case(rng: np.random.Generator):
    S, A = int(rng.integers(1, 7)), int(rng.integers(2, 6))
    gamma = float(rng.uniform(0.1, 0.99))
    policy = policy_from_logits(rng.normal(scale=2.0, size=(S, A)))
    q_r = rng.uniform(0, 1 / (1 - gamma), size=(S, A))
    q_c = rng.uniform(0, 1 / (1 - gamma), size=(S, A))
    mode = list(Mode)[int(rng.integers(4))]
    if mode is Mode.SOFT_NO_CONFLICT:
        x = float(rng.uniform())
        weights = (x, 1.0 - x)
    elif mode is Mode.SOFT_CONFLICT:
        weights = tuple(float(v) for v in rng.uniform(-0.5, 1.5, size=2))
    else:
        weights = None
    eta = float(rng.uniform(1e-3, 0.5))
    return policy, q_r, q_c, mode, weights, eta, gamma


def npg_form_gap(policy, q_r, q_c, mode, weights, eta, gamma) -> float:
    additive = npg_update(policy, q_r, q_c, mode, weights, eta, gamma).probs
    multiplicative = npg_multiplicative(policy, q_r, q_c, mode, weights, eta, gamma)
    return float(np.max(np.abs(additive - multiplicative)))


def check_npg_forms(n_cases: int = 200, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = max(npg_form_gap(*random_npg_case(rng)) for _ in range(n_cases))
    return CheckResult("NPG additive vs multiplicative", worst <= tol,
                       f"max sup-norm gap {worst:.2e} over {n_cases} cases (tol {tol:g})")


def random_policy_table(rng: np.random.Generator, S: int, A: int) -> np.ndarray:
    # mix of interior and near-deterministic policies
    return rng.dirichlet(np.full(A, float(rng.choice([0.1, 1.0, 5.0]))), size=S)


def oracle_dominance(cmdp: TabularCmdp, n_policies: int, rng: np.random.Generator) -> tuple[float, int]:
    """Smallest ``V* - V(pi)`` over random feasible policies, and how many were feasible."""
    opt = solve_constrained_optimum(cmdp)
    margin, feasible = math.inf, 0
    for _ in range(n_policies):
        b = evaluate_probs(cmdp, random_policy_table(rng, cmdp.num_states, cmdp.num_actions))
        if b.v_cost_rho <= cmdp.budget:
            feasible += 1
            margin = min(margin, opt.optimal_reward_value - b.v_reward_rho)
    return margin, feasible


def check_oracle(n_instances: int = 20, n_policies: int = 100, seed: int = 0, slack: float = 1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, total = math.inf, 0
    for i in range(n_instances):
        cmdp = make_random_cmdp(i, int(rng.integers(2, 7)), int(rng.integers(2, 5)), 2, 0.6)
        m, k = oracle_dominance(cmdp, n_policies, rng)
        worst, total = min(worst, m), total + k
    return CheckResult("LP optimum dominates feasible policies", worst >= -slack and total > 0,
                       f"min margin {worst:.2e} over {total} feasible policies")


def check_sample_size_arithmetic() -> CheckResult:
    got = (adjust_sample_size(16000, -0.4)[0], adjust_sample_size(16000, 0.1)[0])
    return CheckResult("sample-size arithmetic", got == (9600, 17600), f"X=16000 -> {got[0]}, {got[1]}")


def check_pcrpo_collapse(seed: int = 0) -> CheckResult:
    """ESPO with zero sample adjustment must replay PCRPO exactly."""
    cmdp = make_random_cmdp(seed, 4, 3, 2, 0.4)
    cfg = EspoConfig(iterations=20, base_sample_size=2000, zeta_plus=0.0, zeta_minus=0.0, seed=seed)
    a, b = espo_run(cmdp, cfg), pcrpo_run(cmdp, replace(cfg, adaptive_samples=False))
    same = all(_same_record(x, y) for x, y in zip(a.trace, b.trace)) and len(a.trace) == len(b.trace)
    return CheckResult("zero-adjustment ESPO equals PCRPO", same, f"{len(a.trace)} iterations compared")


def _same_record(x, y) -> bool:
    for f in x.__dataclass_fields__:
        u, v = getattr(x, f), getattr(y, f)
        if isinstance(u, float) and isinstance(v, float) and math.isnan(u) and math.isnan(v):
            continue
        if u != v:
            return False
    return True


def check_generators() -> CheckResult:
    bad = [v for i in range(10) for v in validate(make_random_cmdp(i, 6, 3, 3, 0.5))]
    return CheckResult("generated instances valid", not bad, f"{len(bad)} violation(s)")


def run_all(quick: bool = True) -> list[CheckResult]:
    n = 5 if quick else 30
    return [
        check_generators(),
        check_gradients(n_instances=n),
        check_npg_forms(n_cases=200),
        check_oracle(n_instances=n if quick else 20, n_policies=100),
        check_sample_size_arithmetic(),
        check_pcrpo_collapse(),
    ]
