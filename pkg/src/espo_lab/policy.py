"""Softmax policies, exact policy gradients and the NPG update modes."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cmdp import TabularCmdp, ValueBundle

ZERO_NORM = 1e-12
GRAM_TOL = 1e-12


class DegenerateGradient(ValueError):
    """Raised when a projection or decomposition has no well-defined answer."""


class Mode(str, enum.Enum):
    COST = "COST"
    SOFT_CONFLICT = "SOFT_CONFLICT"
    SOFT_NO_CONFLICT = "SOFT_NO_CONFLICT"
    REWARD = "REWARD"


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SoftmaxPolicy:
    logits: np.ndarray
    probs: np.ndarray

    @property
    def shape(self):
        return self.logits.shape


def policy_from_logits(w) -> SoftmaxPolicy:
    w = np.array(w, dtype=float)
    if w.ndim != 2:
        raise ValueError(f"logits must be a (S, A) table, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(w))[0])
        raise ValueError(f"non-finite logit at {bad}")
    probs = softmax_rows(w)
    w.setflags(write=False)
    probs.setflags(write=False)
    return SoftmaxPolicy(w, probs)


def uniform_policy(num_states: int, num_actions: int) -> SoftmaxPolicy:
    return policy_from_logits(np.zeros((num_states, num_actions)))


def policy_gradient(visitation, probs, advantage, discount) -> np.ndarray:
    """``dV(rho)/dw(s,a) = d(s) pi(a|s) A(s,a) / (1 - gamma)``."""
    return visitation[:, None] * probs * advantage / (1.0 - discount)


def exact_gradient(cmdp: TabularCmdp, policy: SoftmaxPolicy, bundle: ValueBundle, objective: str) -> np.ndarray:
    """Reward-ascent gradient, or the cost-descent direction ``-grad V_c``."""
    if objective == "reward":
        return policy_gradient(bundle.visitation, policy.probs, bundle.adv_reward, cmdp.discount)
    if objective == "cost":
        return -policy_gradient(bundle.visitation, policy.probs, bundle.adv_cost, cmdp.discount)
    raise ValueError(f"objective must be 'reward' or 'cost', got {objective!r}")


def plugin_gradients(cmdp: TabularCmdp, policy: SoftmaxPolicy, visitation, q_bar_r, q_bar_c):
    """Gradients from estimated Q tables with the plug-in advantage ``Q - sum_a pi Q``."""
    pi = policy.probs
    adv_r = q_bar_r - (pi * q_bar_r).sum(axis=1, keepdims=True)
    adv_c = q_bar_c - (pi * q_bar_c).sum(axis=1, keepdims=True)
    g_r = policy_gradient(visitation, pi, adv_r, cmdp.discount)
    g_c = -policy_gradient(visitation, pi, adv_c, cmdp.discount)
    return g_r, g_c


@dataclass(frozen=True, eq=False)
class GradientPair:
    g_reward: np.ndarray
    g_cost_descent: np.ndarray
    norm_reward: float
    norm_cost: float
    dot: float

    @property
    def conflict(self) -> bool:
        # dot == 0 (a right angle) counts as aligned
        return self.dot < 0.0

    @property
    def degenerate(self) -> bool:
        return self.norm_reward < ZERO_NORM or self.norm_cost < ZERO_NORM


def gradient_pair(g_r: np.ndarray, g_c: np.ndarray) -> GradientPair:
    return GradientPair(
        g_reward=g_r,
        g_cost_descent=g_c,
        norm_reward=float(np.linalg.norm(g_r)),
        norm_cost=float(np.linalg.norm(g_c)),
        dot=float(np.vdot(g_r, g_c)),
    )


def project_conflicting(g_r, g_c, x_r: float, x_c: float) -> np.ndarray:
    """Weighted sum of each gradient projected onto the normal plane of the other."""
    g_r = np.asarray(g_r, dtype=float)
    g_c = np.asarray(g_c, dtype=float)
    nr2 = float(np.vdot(g_r, g_r))
    nc2 = float(np.vdot(g_c, g_c))
    if nr2 < ZERO_NORM**2 or nc2 < ZERO_NORM**2:
        raise DegenerateGradient("degenerate gradient: zero-norm input to projection")
    dot = float(np.vdot(g_r, g_c))
    return x_r * (g_r - (dot / nc2) * g_c) + x_c * (g_c - (dot / nr2) * g_r)


@dataclass(frozen=True)
class SpanCoefficients:
    y_r: float
    y_c: float
    residual: float  # relative to ||g||


def decompose_in_span(g, g_r, g_c) -> SpanCoefficients:
    """Least-squares coefficients of ``g ~ y_r g_r + y_c g_c``."""
    g, g_r, g_c = (np.asarray(v, dtype=float).ravel() for v in (g, g_r, g_c))
    rr, cc, rc = np.vdot(g_r, g_r), np.vdot(g_c, g_c), np.vdot(g_r, g_c)
    gram_det = rr * cc - rc * rc
    if rr == 0.0 or cc == 0.0 or gram_det < GRAM_TOL * rr * cc:
        raise DegenerateGradient("near-collinear gradients: span decomposition is ill-posed")
    gr, gc = np.vdot(g, g_r), np.vdot(g, g_c)
    y_r = (cc * gr - rc * gc) / gram_det
    y_c = (rr * gc - rc * gr) / gram_det
    resid = g - y_r * g_r - y_c * g_c
    scale = max(np.linalg.norm(g), np.finfo(float).tiny)
    return SpanCoefficients(float(y_r), float(y_c), float(np.linalg.norm(resid) / scale))


def npg_exponent(q_bar_r, q_bar_c, mode: Mode, weights=(0.5, 0.5)) -> np.ndarray:
    """Per-(s,a) table G with ``pi_new ∝ pi * exp(eta G / (1 - gamma))``.

    The cost enters with a minus sign in every mode, so cost steps descend.
    ``weights`` are ``(x_r, x_c)`` for SOFT_NO_CONFLICT and ``(y_r, y_c)``
    for SOFT_CONFLICT.
    """
    mode = Mode(mode)
    if mode is Mode.REWARD:
        G = np.asarray(q_bar_r, dtype=float)
    elif mode is Mode.COST:
        G = -np.asarray(q_bar_c, dtype=float)
    else:
        a, b = weights
        if mode is Mode.SOFT_NO_CONFLICT and (a < 0 or b < 0 or abs(a + b - 1.0) > 1e-12):
            raise ValueError(f"soft no-conflict weights must be a convex pair, got {weights}")
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ValueError(f"non-finite mixture weights {weights}")
        G = a * np.asarray(q_bar_r, dtype=float) - b * np.asarray(q_bar_c, dtype=float)
    if not np.all(np.isfinite(G)):
        raise ValueError("non-finite NPG exponent")
    return G


def npg_update(policy: SoftmaxPolicy, q_bar_r, q_bar_c, mode: Mode, weights, eta: float, discount: float) -> SoftmaxPolicy:
    """Additive logit form ``w + eta G / (1 - gamma)``."""
    if not eta > 0:
        raise ValueError(f"learning rate must be positive, got {eta}")
    G = npg_exponent(q_bar_r, q_bar_c, mode, weights)
    return policy_from_logits(policy.logits + eta * G / (1.0 - discount))


def npg_multiplicative(policy: SoftmaxPolicy, q_bar_r, q_bar_c, mode: Mode, weights, eta: float, discount: float) -> np.ndarray:
    """Probability form ``pi * exp(eta G / (1 - gamma)) / Z(s)``."""
    G = npg_exponent(q_bar_r, q_bar_c, mode, weights)
    expo = eta * G / (1.0 - discount)
    # Per-state max shift cancels in Z(s) and avoids overflow.
    expo = expo - expo.max(axis=1, keepdims=True)
    unnorm = policy.probs * np.exp(expo)
    Z = unnorm.sum(axis=1, keepdims=True)
    return unnorm / Z


def conflict_mixture(pair: GradientPair, x_r: float, x_c: float):
    """Mode and exponent weights for one soft-region step.

    Returns ``(mode, (a, b), span)`` where ``span`` is the decomposition of
    the projected gradient (``None`` outside the conflict branch).
    Zero-norm gradients are treated as aligned.  An antiparallel pair
    projects to the zero vector, which leaves the policy unchanged; any other
    collinear degeneracy falls back to a pure cost step.
    """
    if pair.degenerate or not pair.conflict:
        return Mode.SOFT_NO_CONFLICT, (x_r, x_c), None
    g = project_conflicting(pair.g_reward, pair.g_cost_descent, x_r, x_c)
    try:
        span = decompose_in_span(g, pair.g_reward, pair.g_cost_descent)
    except DegenerateGradient:
        if np.linalg.norm(g) <= 1e-9 * (pair.norm_reward + pair.norm_cost):
            span = SpanCoefficients(0.0, 0.0, 0.0)
        else:
            span = SpanCoefficients(0.0, 1.0, float("nan"))
    return Mode.SOFT_CONFLICT, (span.y_r, span.y_c), span


def expected_span_coefficients(pair: GradientPair, x_r: float, x_c: float):
    """Closed-form coefficients of the projected gradient in the (g_r, g_c) basis."""
    dot = pair.dot
    return (x_r - x_c * dot / pair.norm_reward**2, x_c - x_r * dot / pair.norm_cost**2)
