import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from espo_lab.cmdp import evaluate_probs, make_random_cmdp
from espo_lab.policy import (
    DegenerateGradient, Mode, conflict_mixture, decompose_in_span, exact_gradient,
    expected_span_coefficients, gradient_pair, npg_exponent, npg_multiplicative, npg_update,
    plugin_gradients, policy_from_logits, project_conflicting, softmax_rows, uniform_policy,
)
from espo_lab.verify import gradient_relative_error, npg_form_gap, random_npg_case

finite = st.floats(-5, 5, allow_nan=False)


@given(arrays(float, (3, 4), elements=finite))
def test_softmax_rows_are_distributions(w):
    p = softmax_rows(w)
    np.testing.assert_allclose(p.sum(1), 1.0)
    assert np.all(p > 0)


def test_softmax_shift_invariant():
    w = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(softmax_rows(w), softmax_rows(w + 100.0))


def test_non_finite_logits_rejected():
    w = np.zeros((2, 2))
    w[1, 0] = np.nan
    with pytest.raises(ValueError, match=r"\(1, 0\)"):
        policy_from_logits(w)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    cmdp = make_random_cmdp(seed, 4, 3, 3, 0.5, discount=0.8)
    assert gradient_relative_error(cmdp, rng.normal(size=(4, 3))) < 1e-5


def test_plugin_gradients_equal_exact_with_exact_q(small_cmdp, rng):
    pol = policy_from_logits(rng.normal(size=(4, 3)))
    b = evaluate_probs(small_cmdp, pol.probs)
    g_r, g_c = plugin_gradients(small_cmdp, pol, b.visitation, b.q_reward, b.q_cost)
    np.testing.assert_allclose(g_r, exact_gradient(small_cmdp, pol, b, "reward"), atol=1e-12)
    np.testing.assert_allclose(g_c, exact_gradient(small_cmdp, pol, b, "cost"), atol=1e-12)


def test_projection_textbook_example():
    g_r, g_c = np.array([1.0, 0.0]), np.array([-1.0, 1.0])
    g = project_conflicting(g_r, g_c, 0.5, 0.5)
    # g_r minus its g_c component: (0.5, 0.5); g_c minus its g_r component: (0, 1)
    np.testing.assert_allclose(g, 0.5 * np.array([0.5, 0.5]) + 0.5 * np.array([0.0, 1.0]))
    span = decompose_in_span(g, g_r, g_c)
    assert span.residual < 1e-12
    pair = gradient_pair(g_r, g_c)
    np.testing.assert_allclose((span.y_r, span.y_c), expected_span_coefficients(pair, 0.5, 0.5))


@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite), st.floats(0, 1))
def test_projected_terms_are_orthogonal(g_r, g_c, x_r):
    if np.linalg.norm(g_r) < 1e-3 or np.linalg.norm(g_c) < 1e-3:
        return
    nr2, nc2, dot = g_r @ g_r, g_c @ g_c, g_r @ g_c
    part_r = g_r - dot / nc2 * g_c
    part_c = g_c - dot / nr2 * g_r
    assert abs(part_r @ g_c) <= 1e-9 * np.sqrt(nr2 * nc2) * 10
    assert abs(part_c @ g_r) <= 1e-9 * np.sqrt(nr2 * nc2) * 10
    np.testing.assert_allclose(project_conflicting(g_r, g_c, x_r, 1 - x_r),
                               x_r * part_r + (1 - x_r) * part_c, atol=1e-9)


@given(arrays(float, 6, elements=finite), arrays(float, 6, elements=finite), st.floats(0, 1))
def test_span_coefficients_closed_form(g_r, g_c, x_r):
    pair = gradient_pair(g_r, g_c)
    if pair.degenerate:
        return
    cos = pair.dot / (pair.norm_reward * pair.norm_cost)
    if abs(cos) > 0.999:
        return
    g = project_conflicting(g_r, g_c, x_r, 1 - x_r)
    span = decompose_in_span(g, g_r, g_c)
    np.testing.assert_allclose((span.y_r, span.y_c), expected_span_coefficients(pair, x_r, 1 - x_r),
                               rtol=1e-6, atol=1e-8)


def test_collinear_decomposition_raises():
    with pytest.raises(DegenerateGradient):
        decompose_in_span(np.ones(2), np.array([1.0, 0.0]), np.array([2.0, 0.0]))
    with pytest.raises(DegenerateGradient):
        project_conflicting(np.zeros(2), np.ones(2), 0.5, 0.5)


def test_conflict_mixture_branches():
    aligned = gradient_pair(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    assert conflict_mixture(aligned, 0.3, 0.7)[:2] == (Mode.SOFT_NO_CONFLICT, (0.3, 0.7))
    right_angle = gradient_pair(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert conflict_mixture(right_angle, 0.3, 0.7)[0] is Mode.SOFT_NO_CONFLICT
    zero = gradient_pair(np.zeros(2), np.array([0.0, 1.0]))
    assert conflict_mixture(zero, 0.3, 0.7)[0] is Mode.SOFT_NO_CONFLICT
    opposed = gradient_pair(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    mode, weights, _ = conflict_mixture(opposed, 0.5, 0.5)
    assert mode is Mode.SOFT_CONFLICT and weights == (0.0, 0.0)
    conflict = gradient_pair(np.array([1.0, 0.0]), np.array([-1.0, 1.0]))
    mode, (y_r, y_c), span = conflict_mixture(conflict, 0.5, 0.5)
    assert mode is Mode.SOFT_CONFLICT and span.residual < 1e-12
    assert y_r == pytest.approx(0.5 + 0.5 * 1.0) and y_c == pytest.approx(0.5 + 0.5 * 0.5)


def test_npg_exponents_per_mode():
    q_r, q_c = np.array([[1.0, 2.0]]), np.array([[3.0, 5.0]])
    np.testing.assert_allclose(npg_exponent(q_r, q_c, Mode.REWARD), q_r)
    np.testing.assert_allclose(npg_exponent(q_r, q_c, Mode.COST), -q_c)
    np.testing.assert_allclose(npg_exponent(q_r, q_c, Mode.SOFT_NO_CONFLICT, (0.25, 0.75)),
                               0.25 * q_r - 0.75 * q_c)
    np.testing.assert_allclose(npg_exponent(q_r, q_c, Mode.SOFT_CONFLICT, (1.5, 0.2)),
                               1.5 * q_r - 0.2 * q_c)
    with pytest.raises(ValueError, match="convex"):
        npg_exponent(q_r, q_c, Mode.SOFT_NO_CONFLICT, (0.5, 0.6))


def test_npg_zero_q_is_identity(rng):
    pol = policy_from_logits(rng.normal(size=(3, 2)))
    z = np.zeros((3, 2))
    np.testing.assert_allclose(npg_update(pol, z, z, Mode.REWARD, None, 0.1, 0.9).probs, pol.probs)


def test_cost_step_lowers_cost_value(small_cmdp):
    pol = uniform_policy(4, 3)
    b = evaluate_probs(small_cmdp, pol.probs)
    new = npg_update(pol, b.q_reward, b.q_cost, Mode.COST, None, 0.01, small_cmdp.discount)
    assert evaluate_probs(small_cmdp, new.probs).v_cost_rho < b.v_cost_rho


@given(st.integers(0, 2**31 - 1))
def test_npg_forms_agree(seed):
    assert npg_form_gap(*random_npg_case(np.random.default_rng(seed))) <= 1e-10


def test_multiplicative_survives_large_exponent():
    pol = uniform_policy(1, 2)
    q = np.array([[1e4, 0.0]])
    probs = npg_multiplicative(pol, q, np.zeros((1, 2)), Mode.REWARD, None, 1.0, 0.99)
    assert np.all(np.isfinite(probs)) and probs[0, 0] == pytest.approx(1.0)
