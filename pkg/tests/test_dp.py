import numpy as np
import pytest

from lbql.dp import (
    bellman_backup,
    bellman_residual,
    greedy_policy,
    greedy_value,
    policy_evaluation,
    q_value_iteration,
    relative_error,
    solve_qstar,
)
from lbql.envs import make_env
from lbql.envs.carshare import CarsharePricing2
from lbql.errors import NoConvergenceError, UndefinedMetricError, UnsupportedModelError

from conftest import ENUMERABLE


def test_example1_closed_form():
    q = q_value_iteration(make_env("example1"), tol=1e-10)
    np.testing.assert_allclose(q[:2], [[-1.0, 0.0], [-1.0, 0.0]], atol=1e-6)
    np.testing.assert_array_equal(greedy_value(q)[:2], [0.0, 0.0])


def test_near_zero_discount_returns_expected_reward():
    m = CarsharePricing2(gamma=1e-12)
    q = q_value_iteration(m, tol=1e-10)
    np.testing.assert_allclose(q, m.expected_reward, atol=1e-9)


def test_residual_is_self_certified():
    m = make_env("2-cs-r")
    q = q_value_iteration(m, tol=1e-8)
    assert bellman_residual(m, q) <= 1e-8


def test_residuals_non_increasing_after_first_sweep():
    residuals = []
    q_value_iteration(make_env("wg"), tol=1e-10, residuals=residuals)
    diffs = np.diff(residuals[1:])
    assert np.all(diffs <= 1e-12)


def test_rejects_sampling_only_model():
    with pytest.raises(UnsupportedModelError):
        q_value_iteration(make_env("4-cs"))


def test_no_convergence_carries_residual():
    with pytest.raises(NoConvergenceError) as info:
        q_value_iteration(make_env("2-cs-r"), tol=1e-10, max_iters=5)
    assert info.value.residual > 1e-10


def test_bad_tolerance():
    with pytest.raises(ValueError):
        q_value_iteration(make_env("example1"), tol=0)


@pytest.mark.parametrize("name", ENUMERABLE)
def test_solve_qstar_agrees_with_value_iteration(name):
    m = make_env(name)
    q = solve_qstar(m)
    np.testing.assert_allclose(q, q_value_iteration(m, tol=1e-11), atol=1e-8)
    assert bellman_residual(m, q) < 1e-9


def test_sweep_order_invariance():
    """Gauss-Seidel sweeps in a random state order reach the same V*."""
    m = make_env("wg")
    rng = np.random.default_rng(0)
    q = np.zeros((m.n_states, m.n_actions))
    for _ in range(400):
        for s in rng.permutation(m.n_states):
            if m.terminal[s]:
                continue
            v = m.masked_max(q)
            q[s] = m.expected_reward[s] + m.gamma * (v[m.next_states[s]] @ m.probs)
    v_gs = greedy_value(q, m)
    v_j = greedy_value(q_value_iteration(m, tol=1e-11), m)
    np.testing.assert_allclose(v_gs, v_j, atol=1e-8)


def test_greedy_value_examples():
    assert greedy_value(np.array([[4.0], [-2.0]])).tolist() == [4.0, -2.0]
    assert greedy_value(np.full((3, 2), -5.0)).tolist() == [-5.0] * 3
    assert greedy_policy(np.array([[0.0, 0.0], [1.0, 3.0]])).tolist() == [0, 1]


def test_greedy_value_respects_mask():
    m = make_env("2-cs-r")
    q = np.zeros((m.n_states, m.n_actions))
    q[~m.feasible] = 100.0
    assert np.all(greedy_value(q, m) == 0.0)


def test_relative_error_examples():
    v_star = np.array([3.0, 4.0])
    assert relative_error(np.array([[3.0], [0.0]]), v_star) == pytest.approx(0.8)
    assert relative_error(2 * v_star[:, None], v_star) == pytest.approx(1.0)
    assert relative_error(v_star[:, None], v_star) == 0.0
    with pytest.raises(UndefinedMetricError):
        relative_error(np.zeros((2, 1)), np.zeros(2))


def test_policy_evaluation_of_optimal_policy_is_qstar():
    m = make_env("2-cs")
    q = q_value_iteration(m, tol=1e-11)
    np.testing.assert_allclose(policy_evaluation(m, greedy_policy(q, m)), q, atol=1e-7)


def test_bellman_backup_fixes_terminal_rows():
    m = make_env("wg")
    out = bellman_backup(m, np.ones((m.n_states, m.n_actions)))
    assert np.all(out[m.terminal] == 0)
