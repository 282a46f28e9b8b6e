"""Lookahead-bounded Q-learning in its three variants.

Every variant keeps the projected table ``Q'`` plus bound tables ``U`` and
``L`` started at ``+rho`` and ``-rho``.  One step computes the Q-learning
iterate from ``Q'`` at the visited pair, refreshes bounds, then clips the
visited entry into ``[L, U]``.

* ``lbql`` (replay batch): noises go into a ring buffer of size ``kappa``.
  Once ``n >= kappa``, every ``m``-th step whose visited gap ``U - L``
  exceeds ``delta`` draws a batch of ``K`` buffer noises for the penalty
  expectation plus a path from the buffer, and moves ``U`` and ``L`` towards
  the all-pairs bound tables.
* ``lbql-ideal``: every step, a fresh model path and fresh batches of ``K``
  model noises per path step; only the visited pair's bounds move.
* ``lbql-exact``: every step, penalties use the empirical noise distribution
  and the path comes from an unbounded buffer; only the visited pair moves.
"""

from __future__ import annotations

import numpy as np

from ..bounds import EmpiricalNoiseDist, NoiseBuffer, PenaltyContext, bound_tables, sample_path
from ..errors import LBQLError
from ..mdp import require_enumerable
from .base import Agent


class InvariantViolation(LBQLError, AssertionError):
    """A bound-ordering or projection invariant failed at runtime."""


class LBQL(Agent):
    name = "lbql"
    variant = "replay-batch"

    def _init_tables(self, q0):
        model = self.model
        self.qp = q0
        shape = (model.n_states, model.n_actions)
        self.upper = np.full(shape, self.rho)
        self.lower = np.full(shape, -self.rho)
        self.bound_updates = np.zeros(shape, dtype=np.int64)
        self.n_bound_phases = 0
        self._setup_sources()

    def _setup_sources(self):
        self.buffer = NoiseBuffer(self.model.noise_dim, capacity=self.hp.kappa)

    @property
    def q(self):
        return self.qp

    def acting_table(self):
        return self.qp

    def bound_gap(self):
        """Mean ``U - L`` over feasible pairs of non-terminal states."""
        model = self.model
        mask = model.feasible & ~model.terminal[:, None]
        return float((self.upper - self.lower)[mask].mean())

    def _beta(self, counts):
        hp = self.hp
        if hp.beta_exponent is None:
            return hp.beta
        return 1.0 / np.power(np.maximum(counts, 1), hp.beta_exponent)

    def _move_bounds(self, idx, q_up, q_low):
        """Step ``U`` and ``L`` at ``idx`` towards fresh bound samples."""
        self.bound_updates[idx] += 1
        beta = self._beta(self.bound_updates[idx])
        keep = 1.0 - beta
        u = np.maximum(keep * self.upper[idx] + beta * q_up, -self.rho)
        lo = np.minimum(keep * self.lower[idx] + beta * q_low, self.rho)
        if self.hp.check_invariants and np.any(lo > u):
            raise InvariantViolation(f"lower bound exceeds upper bound at step {self.n}")
        self.upper[idx] = u
        self.lower[idx] = lo
        self.n_bound_phases += 1

    def _project(self, s, a):
        if self.hp.project_all:
            np.clip(self.qp, self.lower, self.upper, out=self.qp)
            self.qp[self.model.terminal] = 0.0
        else:
            lo, hi = self.lower[s, a], self.upper[s, a]
            self.qp[s, a] = max(min(self.qp[s, a], hi), lo)
            if self.hp.check_invariants and not lo <= self.qp[s, a] <= hi:
                raise InvariantViolation(f"projection failed at step {self.n}")

    def _learn(self, s, a, reward, s_next, w, alpha):
        model = self.model
        target = reward + model.gamma * model.state_max(self.qp, s_next)
        # Q_{n+1} differs from Q'_n only at (s, a); it is also phi for the penalties
        self.qp[s, a] += alpha * (target - self.qp[s, a])
        updated = self._bound_phase(s, a, w)
        self._project(s, a)
        return updated

    def _bound_phase(self, s, a, w):
        hp = self.hp
        self.buffer.push(w)
        due = (self.n >= hp.kappa and self.n % hp.m == 0
               and self.upper[s, a] - self.lower[s, a] > hp.delta)
        if not due:
            return False
        batch = self.buffer.sample(self.rng, hp.K)
        path = sample_path(self.model, self.rng, hp.horizon_cap, source=self.buffer)
        ctx = PenaltyContext.fixed_batch(self.model, self.qp, batch)
        q_up, q_low = bound_tables(self.model, path, ctx)
        self._move_bounds(np.s_[:, :], q_up, q_low)
        return True


class LBQLIdeal(LBQL):
    name = "lbql-ideal"
    variant = "idealized"

    def _setup_sources(self):
        pass

    def _bound_phase(self, s, a, w):
        path = sample_path(self.model, self.rng, self.hp.horizon_cap)
        ctx = PenaltyContext.fresh_batch(self.model, self.qp, self.hp.K, self.rng)
        q_up, q_low = bound_tables(self.model, path, ctx)
        self._move_bounds((s, a), q_up[s, a], q_low[s, a])
        return True


class LBQLExact(LBQL):
    name = "lbql-exact"
    variant = "replay-exact"

    def _setup_sources(self):
        require_enumerable(self.model)
        self.buffer = NoiseBuffer(self.model.noise_dim, capacity=None)
        self.empirical = EmpiricalNoiseDist(self.model.support_size)

    def _bound_phase(self, s, a, w):
        self.buffer.push(w)
        self.empirical.observe(w)
        path = sample_path(self.model, self.rng, self.hp.horizon_cap, source=self.buffer)
        ctx = PenaltyContext.empirical(self.model, self.qp, self.empirical)
        q_up, q_low = bound_tables(self.model, path, ctx)
        self._move_bounds((s, a), q_up[s, a], q_low[s, a])
        return True
