"""Finite MDPs in transition-function form and shared numeric primitives.

A model is described by a transition function ``s' = f(s, a, w)`` and a
realized reward ``g(s, a, w)`` where ``w`` is exogenous i.i.d. noise.  Noise
outcomes are rows of a small integer array (``noise_dim`` entries).  Models
whose support is small enough to enumerate carry precomputed tensors
``next_states[s, a, k]`` and ``rewards[s, a, k]`` over the support, with the
noise row ``[k]`` simply indexing into it.

Tables are dense ``(n_states, n_actions)`` arrays.  Actions that are not
feasible in a state stay in the table (so every table is rectangular) but are
excluded from every max/argmax through ``model.feasible``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidIntervalError, UnsupportedModelError

__all__ = [
    "FiniteMDP",
    "EnumerableMDP",
    "DiscreteDistribution",
    "project_interval",
    "rho_bound",
    "sample_horizon",
    "learning_rate",
    "exploration_rate",
    "DEFAULT_HORIZON_CAP",
]

DEFAULT_HORIZON_CAP = 10_000


def project_interval(x, lo=-math.inf, hi=math.inf):
    """Clamp ``x`` onto ``[lo, hi]``; either end may be infinite."""
    if lo > hi:
        raise InvalidIntervalError(f"empty interval [{lo}, {hi}]")
    return max(min(x, hi), lo)


def rho_bound(model):
    """Return ``R_max / (1 - gamma)``, the a-priori bound on any action value."""
    return model.r_max / (1.0 - model.gamma)


def sample_horizon(gamma, rng, cap=DEFAULT_HORIZON_CAP):
    """Draw an absorption time ``tau ~ Geometric(1 - gamma)`` truncated at ``cap``."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    p = 1.0 - gamma
    if p >= 1.0:
        return 1
    return int(min(rng.geometric(p), cap))


def learning_rate(count, r):
    """Polynomial step size ``1 / max(count, 1) ** r``."""
    return 1.0 / max(count, 1) ** r


def exploration_rate(count, e):
    """Epsilon for epsilon-greedy, ``1 / max(count, 1) ** e``."""
    return 1.0 / max(count, 1) ** e


class DiscreteDistribution:
    """Finite distribution over noise outcome codes ``0..len(probs)-1``."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        self.probs = probs
        self.cdf = np.cumsum(probs)
        self.cdf[-1] = 1.0

    def __len__(self):
        return self.probs.size

    @property
    def outcomes(self):
        return np.arange(self.probs.size)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.searchsorted(self.cdf, u, side="right")


class FiniteMDP:
    """Base class for finite MDPs given by a transition function.

    Subclasses implement :meth:`sample_noise_one`, :meth:`sample_noise`,
    :meth:`step` and :meth:`step_tables`.
    """

    name = "mdp"
    enumerable = False

    def __init__(self, n_states, n_actions, gamma, r_max, noise_dim=1,
                 feasible=None, terminal=None):
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {gamma}")
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.gamma = float(gamma)
        self.r_max = float(r_max)
        self.noise_dim = int(noise_dim)
        if feasible is None:
            feasible = np.ones((self.n_states, self.n_actions), dtype=bool)
        self.feasible = np.asarray(feasible, dtype=bool)
        if terminal is None:
            terminal = np.zeros(self.n_states, dtype=bool)
        self.terminal = np.asarray(terminal, dtype=bool)
        self.all_feasible = bool(self.feasible.all())
        self.feasible_actions = [np.flatnonzero(row) for row in self.feasible]
        self._neg_mask = np.where(self.feasible, 0.0, -np.inf)

    # -- noise and dynamics -------------------------------------------------
    def sample_noise_one(self, rng):
        raise NotImplementedError

    def sample_noise(self, rng, size):
        """Return ``size`` i.i.d. noise rows as an int array ``(size, noise_dim)``."""
        raise NotImplementedError

    def step(self, s, a, w):
        """Return ``(next_state, realized_reward)``."""
        raise NotImplementedError

    def step_tables(self, ws):
        """Apply every ``(s, a)`` pair to each noise row in ``ws``.

        Returns ``(next_states, rewards)`` of shape ``(len(ws), S, A)``.
        """
        raise NotImplementedError

    def reset(self, rng):
        """Initial state of an episode (or of a continuing run)."""
        return 0

    # -- states ---------------------------------------------------------------
    def encode_state(self, state):
        return int(state)

    def decode_state(self, index):
        return int(index)

    # -- table helpers ----------------------------------------------------------
    def masked_max(self, table):
        """Row-wise max over feasible actions."""
        if self.all_feasible:
            return table.max(axis=-1)
        return (table + self._neg_mask).max(axis=-1)

    def greedy_policy(self, table):
        """Row-wise argmax over feasible actions, lowest index on ties."""
        if self.all_feasible:
            return table.argmax(axis=-1)
        return (table + self._neg_mask).argmax(axis=-1)

    def best_action(self, table, s):
        row = table[s]
        if self.all_feasible:
            return int(row.argmax())
        acts = self.feasible_actions[s]
        return int(acts[row[acts].argmax()])

    def state_max(self, table, s):
        if self.all_feasible:
            return float(table[s].max())
        return float(table[s, self.feasible_actions[s]].max())

    def __repr__(self):
        return (f"{type(self).__name__}(name={self.name!r}, states={self.n_states}, "
                f"actions={self.n_actions}, gamma={self.gamma})")


class EnumerableMDP(FiniteMDP):
    """Finite MDP whose noise support is small enough to tabulate.

    Subclasses provide the scalar dynamics through :meth:`transition` and the
    distribution through ``noise``; the constructor tabulates ``f`` and ``g``
    over every state, action and support element.
    """

    enumerable = True

    def __init__(self, n_states, n_actions, gamma, noise, feasible=None,
                 terminal=None, r_max=None):
        self.noise = noise if isinstance(noise, DiscreteDistribution) else DiscreteDistribution(noise)
        n_states, n_actions = int(n_states), int(n_actions)
        n_w = len(self.noise)
        ns = np.empty((n_states, n_actions, n_w), dtype=np.int64)
        g = np.empty((n_states, n_actions, n_w), dtype=float)
        for s in range(n_states):
            for a in range(n_actions):
                for k in range(n_w):
                    ns[s, a, k], g[s, a, k] = self.transition(s, a, k)
        if ns.min() < 0 or ns.max() >= n_states:
            raise ValueError("transition function leaves the state space")
        self.next_states = ns
        self.rewards = g
        self.expected_reward = g @ self.noise.probs
        # (S, A, W) -> (W, S, A) copies make per-outcome slicing contiguous
        self._ns_w = np.ascontiguousarray(ns.transpose(2, 0, 1))
        self._g_w = np.ascontiguousarray(g.transpose(2, 0, 1))
        if r_max is None:
            r_max = float(np.abs(g).max())
        super().__init__(n_states, n_actions, gamma, r_max, noise_dim=1,
                         feasible=feasible, terminal=terminal)

    def transition(self, s, a, k):
        """Scalar dynamics for support element ``k``: ``(next_state, reward)``."""
        raise NotImplementedError

    @property
    def probs(self):
        return self.noise.probs

    @property
    def support_size(self):
        return len(self.noise)

    def support(self):
        """All support elements as noise rows ``(W, 1)``."""
        return np.arange(self.support_size)[:, None]

    def decode_noise(self, code):
        return int(code)

    def sample_noise_one(self, rng):
        return int(self.noise.cdf.searchsorted(rng.random(), side="right"))

    def sample_noise(self, rng, size):
        return self.noise.sample(rng, size)[:, None]

    def step(self, s, a, w):
        k = int(w[0]) if np.ndim(w) else int(w)
        return int(self.next_states[s, a, k]), float(self.rewards[s, a, k])

    def step_tables(self, ws):
        codes = np.asarray(ws).reshape(len(ws), -1)[:, 0]
        return self._ns_w[codes], self._g_w[codes]


def require_enumerable(model):
    if not getattr(model, "enumerable", False):
        raise UnsupportedModelError(
            f"model {model.name!r} has a sampling-only noise support")
    return model
