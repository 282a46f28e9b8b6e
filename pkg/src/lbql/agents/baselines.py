"""Baseline learners: Q-learning, Double Q-learning, Speedy Q-learning, bias-corrected Q-learning."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .base import Agent, ql_update


class QLearning(Agent):
    name = "ql"

    def _learn(self, s, a, reward, s_next, w, alpha):
        ql_update(self.model, self.q, s, a, reward, s_next, alpha)
        return False


class DoubleQLearning(Agent):
    """Two tables; a fair coin picks which one is updated.

    The updated table evaluates the other table at its own greedy action.
    ``coin`` may be replaced by any zero-argument callable returning ``True``
    for an update of table A.
    """

    name = "double-ql"

    def _init_tables(self, q0):
        self.qa = q0
        self.qb = q0.copy()
        self.coin = lambda: self.rng.random() < 0.5

    def acting_table(self):
        return self.qa + self.qb

    def value_table(self):
        return 0.5 * (self.qa + self.qb)

    @property
    def q(self):
        return self.value_table()

    def _learn(self, s, a, reward, s_next, w, alpha):
        model = self.model
        upd, other = (self.qa, self.qb) if self.coin() else (self.qb, self.qa)
        b = model.best_action(upd, s_next)
        target = reward + model.gamma * other[s_next, b]
        upd[s, a] += alpha * (target - upd[s, a])
        return False


class SpeedyQLearning(Agent):
    """Asynchronous Speedy Q-learning with per-pair previous iterates."""

    name = "sql"

    def _init_tables(self, q0):
        self.q = q0
        self.q_prev = q0.copy()

    def _learn(self, s, a, reward, s_next, w, alpha):
        model = self.model
        t_prev = reward + model.gamma * model.state_max(self.q_prev, s_next)
        t_curr = reward + model.gamma * model.state_max(self.q, s_next)
        old = self.q[s, a]
        self.q[s, a] = old + alpha * (t_prev - old) + (1.0 - alpha) * (t_curr - t_prev)
        self.q_prev[s, a] = old
        return False


@lru_cache(maxsize=None)
def expected_max_normal(k, samples=200_000):
    """Monte Carlo ``E[max of k i.i.d. N(0,1)]`` with a fixed seed."""
    if k == 1:
        return 0.0
    rng = np.random.default_rng(0)
    return float(rng.standard_normal((samples, k)).max(axis=1).mean())


class BiasCorrectedQLearning(Agent):
    """Q-learning with a downward correction of the max target.

    The correction at ``(s, a)`` is ``c_K * sigma / sqrt(nu(s, a))`` where
    ``c_K`` is the expected maximum of ``K`` standard normals and ``sigma`` is
    the standard deviation of the one-step target ``g + gamma * max_b Q(s', b)``
    under the empirical distribution of the transitions observed at ``(s, a)``,
    re-evaluated with the current table.  Deterministic pairs get no correction.
    """

    name = "bcql"

    def _init_tables(self, q0):
        self.q = q0
        self.c_k = expected_max_normal(self.hp.K)
        self._outcomes = {}

    def correction(self, s, a):
        seen = self._outcomes.get((s, a))
        if not seen or len(seen) < 2:
            return 0.0
        model = self.model
        keys = list(seen)
        counts = np.fromiter((seen[k] for k in keys), dtype=float, count=len(keys))
        targets = np.array([g + model.gamma * model.state_max(self.q, s2) for s2, g in keys])
        p = counts / counts.sum()
        mean = p @ targets
        sigma = float(np.sqrt(max(p @ (targets - mean) ** 2, 0.0)))
        return self.c_k * sigma / np.sqrt(self.visits_sa[s, a])

    def _learn(self, s, a, reward, s_next, w, alpha):
        seen = self._outcomes.setdefault((s, a), {})
        key = (s_next, reward)
        seen[key] = seen.get(key, 0) + 1
        model = self.model
        target = reward + model.gamma * model.state_max(self.q, s_next) - self.correction(s, a)
        self.q[s, a] += alpha * (target - self.q[s, a])
        return False
