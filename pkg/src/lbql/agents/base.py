"""Shared agent loop: hyperparameters, epsilon-greedy action choice, Q-learning update."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigError
from ..mdp import DEFAULT_HORIZON_CAP, exploration_rate, learning_rate, rho_bound


@dataclass(frozen=True)
class Hyperparams:
    """Learning-rate, exploration and bound-phase settings.

    ``alpha`` and ``epsilon``, when set, replace the polynomial schedules by
    constants.  ``beta_exponent`` switches the bound step size from the
    constant ``beta`` to ``1 / k**beta_exponent`` with ``k`` the number of
    bound updates the pair has received.
    """

    r: float = 0.5
    e: float = 0.5
    alpha: float | None = None
    epsilon: float | None = None
    beta: float = 0.01
    beta_exponent: float | None = None
    K: int = 20
    kappa: int = 40
    m: int = 10
    delta: float = 0.01
    init: str = "uniform"
    project_all: bool = False
    horizon_cap: int = DEFAULT_HORIZON_CAP
    check_invariants: bool = True

    def __post_init__(self):
        def bad(msg):
            raise ConfigError(f"invalid hyperparameter: {msg}")
        if not 0.0 < self.r <= 1.0:
            bad(f"r={self.r} must lie in (0, 1]")
        if not 0.0 <= self.e <= 1.0:
            bad(f"e={self.e} must lie in [0, 1]")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            bad(f"alpha={self.alpha} must lie in [0, 1]")
        if self.epsilon is not None and not 0.0 <= self.epsilon <= 1.0:
            bad(f"epsilon={self.epsilon} must lie in [0, 1]")
        if not 0.0 < self.beta <= 1.0:
            bad(f"beta={self.beta} must lie in (0, 1]")
        if self.beta_exponent is not None and not 0.0 < self.beta_exponent <= 1.0:
            bad(f"beta_exponent={self.beta_exponent} must lie in (0, 1]")
        for name in ("K", "kappa", "m", "horizon_cap"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                bad(f"{name}={value} must be a positive integer")
        if self.delta < 0:
            bad(f"delta={self.delta} must be non-negative")
        if self.init not in ("uniform", "zeros"):
            bad(f"init={self.init!r} must be 'uniform' or 'zeros'")

    def replace(self, **changes):
        data = asdict(self)
        unknown = set(changes) - set(data)
        if unknown:
            raise ConfigError(f"unknown hyperparameters {sorted(unknown)}")
        data.update(changes)
        return Hyperparams(**data)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Transition:
    """What one agent step observed."""

    step: int
    state: int
    action: int
    reward: float
    next_state: int
    bounds_updated: bool = False


def initial_q(model, hp, rng):
    """``Q_0`` uniform on ``[-rho, rho]`` (or zeros), terminal rows pinned to 0."""
    shape = (model.n_states, model.n_actions)
    if hp.init == "zeros":
        q = np.zeros(shape)
    else:
        rho = rho_bound(model)
        q = rng.uniform(-rho, rho, size=shape)
    q[model.terminal] = 0.0
    return q


def select_action(model, table, s, epsilon, rng):
    """Epsilon-greedy over feasible actions; greedy ties go to the lowest index.

    Always consumes one uniform draw, plus one integer draw when exploring.
    """
    if rng.random() < epsilon:
        acts = model.feasible_actions[s]
        return int(acts[rng.integers(len(acts))])
    return model.best_action(table, s)


def ql_update(model, q, s, a, r_obs, s_next, alpha):
    """In-place ``Q(s,a) += alpha * (r + gamma * max_b Q(s', b) - Q(s,a))``."""
    target = r_obs + model.gamma * model.state_max(q, s_next)
    q[s, a] += alpha * (target - q[s, a])
    return q


class Agent:
    """Uniform step interface shared by every learner.

    Subclasses implement :meth:`_learn` and :meth:`acting_table`.  Per step the
    generator is consumed in a fixed order: action draw, environment noise,
    then whatever the learner itself draws.
    """

    name = "agent"

    def __init__(self, model, hp=None, seed=0):
        self.model = model
        self.hp = hp or Hyperparams()
        self.rng = np.random.default_rng(seed)
        self.n = 0
        self.visits_s = np.zeros(model.n_states, dtype=np.int64)
        self.visits_sa = np.zeros((model.n_states, model.n_actions), dtype=np.int64)
        self.rho = rho_bound(model)
        self._init_tables(initial_q(model, self.hp, self.rng))
        self.state = model.reset(self.rng)

    def _init_tables(self, q0):
        self.q = q0

    def acting_table(self):
        """Table whose greedy action the behaviour policy follows."""
        return self.q

    def value_table(self):
        """Table whose greedy value is scored against ``V*``."""
        return self.acting_table()

    def epsilon(self, s):
        if self.hp.epsilon is not None:
            return self.hp.epsilon
        return exploration_rate(self.visits_s[s], self.hp.e)

    def alpha(self, s, a):
        if self.hp.alpha is not None:
            return self.hp.alpha
        return learning_rate(self.visits_sa[s, a], self.hp.r)

    def step(self):
        model, rng = self.model, self.rng
        s = self.state
        a = select_action(model, self.acting_table(), s, self.epsilon(s), rng)
        w = model.sample_noise_one(rng)
        s_next, reward = model.step(s, a, w)
        self.visits_s[s] += 1
        self.visits_sa[s, a] += 1
        updated = self._learn(s, a, reward, s_next, w, self.alpha(s, a))
        record = Transition(self.n, s, a, reward, s_next, bool(updated))
        self.n += 1
        self.state = model.reset(rng) if model.terminal[s_next] else s_next
        return record

    def run(self, steps):
        for _ in range(steps):
            self.step()
        return self

    def _learn(self, s, a, reward, s_next, w, alpha):
        raise NotImplementedError
