"""Exact dynamic programming on enumerable models, and the relative-error metric."""

from __future__ import annotations

import numpy as np

from .errors import NoConvergenceError, UndefinedMetricError
from .mdp import require_enumerable

__all__ = [
    "bellman_backup",
    "bellman_residual",
    "q_value_iteration",
    "solve_qstar",
    "greedy_value",
    "greedy_policy",
    "relative_error",
    "policy_evaluation",
]


def bellman_backup(model, q):
    """One synchronous sweep ``r(s,a) + gamma * E_w[max_b q(f(s,a,w), b)]``.

    Terminal rows are pinned to zero.
    """
    v = model.masked_max(q)
    out = model.expected_reward + model.gamma * (v[model.next_states] @ model.probs)
    out[model.terminal] = 0.0
    return out


def bellman_residual(model, q):
    """Sup-norm of ``T q - q`` over feasible pairs."""
    diff = np.abs(bellman_backup(model, q) - q)
    return float(diff[model.feasible].max())


def q_value_iteration(model, tol=1e-10, max_iters=1_000_000, q0=None, residuals=None):
    """Solve for ``Q*`` by Jacobi value iteration.

    Iterates until successive sweeps differ by at most ``tol`` in sup norm,
    which bounds the Bellman residual of the returned table by ``gamma * tol``.
    Pass a list as ``residuals`` to collect the per-sweep differences.
    """
    require_enumerable(model)
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = np.zeros((model.n_states, model.n_actions)) if q0 is None else np.array(q0, dtype=float)
    q[model.terminal] = 0.0
    diff = np.inf
    for _ in range(max_iters):
        q_next = bellman_backup(model, q)
        diff = float(np.abs(q_next - q)[model.feasible].max())
        if residuals is not None:
            residuals.append(diff)
        q = q_next
        if diff <= tol:
            return q
    raise NoConvergenceError(
        f"value iteration did not reach tol={tol} in {max_iters} sweeps", diff)


def solve_qstar(model, max_iters=1_000_000):
    """``Q*`` iterated to a fixed point in extended precision, then rounded.

    Used as the reference table for bound checks on long sample paths, where a
    systematic float64 stopping residual would accumulate once per step.
    """
    require_enumerable(model)
    ld = np.longdouble
    reward = model.expected_reward.astype(ld)
    probs = model.probs.astype(ld)
    probs /= probs.sum()
    gamma = ld(model.gamma)
    neg = np.where(model.feasible, 0.0, -np.inf).astype(ld)
    q = np.zeros(reward.shape, dtype=ld)
    best = np.inf
    for _ in range(max_iters):
        v = (q + neg).max(axis=1)
        q_next = reward + gamma * (v[model.next_states] @ probs)
        q_next[model.terminal] = 0
        diff = float(np.abs(q_next - q)[model.feasible].max())
        q = q_next
        if diff == 0.0 or (diff >= best and diff < 1e-9):
            return q.astype(float)
        best = min(best, diff)
    raise NoConvergenceError(f"no fixed point within {max_iters} sweeps", best)


def greedy_value(q, model=None):
    """``V(s) = max_a Q(s, a)``, over feasible actions when ``model`` is given."""
    q = np.asarray(q, dtype=float)
    return model.masked_max(q) if model is not None else q.max(axis=-1)


def greedy_policy(q, model=None):
    """Greedy actions with lowest-index tie-break."""
    q = np.asarray(q, dtype=float)
    return model.greedy_policy(q) if model is not None else q.argmax(axis=-1)


def relative_error(q, v_star, model=None):
    """``||V - V*||_2 / ||V*||_2`` with ``V`` the greedy value of ``q``."""
    v_star = np.asarray(v_star, dtype=float)
    denom = float(np.linalg.norm(v_star))
    if denom == 0.0:
        raise UndefinedMetricError("relative error is undefined for a zero reference value")
    return float(np.linalg.norm(greedy_value(q, model) - v_star)) / denom


def policy_evaluation(model, policy):
    """``Q^pi`` for a deterministic policy, by a direct linear solve."""
    require_enumerable(model)
    n_s, n_a = model.n_states, model.n_actions
    policy = np.asarray(policy)
    p_next = np.zeros((n_s, n_a, n_s))
    for k, pk in enumerate(model.probs):
        np.add.at(p_next, (np.arange(n_s)[:, None], np.arange(n_a)[None, :],
                           model.next_states[:, :, k]), pk)
    r = model.expected_reward.copy()
    r[model.terminal] = 0.0
    p_pi = p_next[np.arange(n_s), policy]          # (S, S')
    live = ~model.terminal
    a_mat = np.eye(n_s) - model.gamma * p_pi * live[:, None]
    v = np.linalg.solve(a_mat, r[np.arange(n_s), policy])
    v[model.terminal] = 0.0
    q = r + model.gamma * p_next @ v
    q[model.terminal] = 0.0
    return q
