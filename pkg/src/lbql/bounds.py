"""Information-relaxation upper and lower bounds on ``Q*``.

Bounds come from the absorption-time form of the problem: a horizon
``tau ~ Geometric(1 - gamma)`` and noises ``w_1..w_tau`` are drawn, and two
deterministic backward recursions are solved along that path with the
penalty

    zeta_t(s, a) = phi(s', pi(s')) - gamma * E_w[phi(f(s, a, w), pi(f(s, a, w)))]

where ``pi`` is greedy for ``phi``, ``s' = f(s, a, w_{t+1})`` and the first
term is zero on the last step (the path is absorbed).  Absorption enters the
expectation only through the factor ``gamma`` because ``phi`` vanishes on the
absorbing state.

The expectation can be exact (enumerable models), a fresh batch of ``K``
simulator draws for every step, one fixed batch for the whole path, or the
empirical noise distribution of a replay buffer.  Upper and lower recursions
always share the path and every per-step expectation, which makes
``upper >= lower`` hold exactly rather than only on average.

With ``reward_mode="expected"`` (the default) the recursions collect the
expected one-step reward under the same expectation source; with
``"realized"`` they collect ``g(s, a, w_{t+1})`` along the path.  Both give
valid bounds; only the former has zero variance at ``phi = Q*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBufferError, UnsupportedModelError
from .mdp import DEFAULT_HORIZON_CAP, require_enumerable, sample_horizon

__all__ = [
    "SamplePath",
    "PenaltyContext",
    "EmpiricalNoiseDist",
    "NoiseBuffer",
    "BoundPair",
    "MCEstimate",
    "sample_path",
    "penalty",
    "inner_dp_upper",
    "inner_dp_lower",
    "bound_pair",
    "bound_tables",
    "mc_bound_estimate",
    "mc_bound_tables",
]

MODES = ("exact", "fresh-batch", "fixed-batch", "empirical")
REWARD_MODES = ("expected", "realized")


@dataclass(frozen=True)
class SamplePath:
    """Noise rows ``w_1..w_tau`` of one absorption-time sample path."""

    noises: np.ndarray

    def __post_init__(self):
        if len(self.noises) < 1:
            raise ValueError("a sample path needs at least one step")

    @property
    def tau(self):
        return len(self.noises)

    def truncated(self, cap=DEFAULT_HORIZON_CAP):
        """Whether the horizon hit the cap rather than a natural absorption."""
        return self.tau >= cap

    def __len__(self):
        return len(self.noises)


@dataclass(frozen=True)
class BoundPair:
    upper: float
    lower: float


@dataclass(frozen=True)
class MCEstimate:
    upper: float
    lower: float
    upper_se: float
    lower_se: float
    n_paths: int


class EmpiricalNoiseDist:
    """Observation counts over an enumerable noise support."""

    def __init__(self, support_size):
        self.counts = np.zeros(support_size, dtype=np.int64)
        self.n = 0

    def observe(self, code):
        self.counts[int(code)] += 1
        self.n += 1

    @property
    def probs(self):
        if self.n == 0:
            raise EmptyBufferError("no noise observations yet")
        return self.counts / self.n

    def sample(self, rng, size):
        if self.n == 0:
            raise EmptyBufferError("no noise observations yet")
        cdf = np.cumsum(self.counts) / self.n
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(size), side="right")[:, None]


class NoiseBuffer:
    """Ring buffer of observed noise rows; ``capacity=None`` never evicts."""

    def __init__(self, noise_dim, capacity=None):
        self.capacity = capacity
        self._data = np.zeros((capacity or 1024, noise_dim), dtype=np.int64)
        self._size = 0
        self._next = 0

    def __len__(self):
        return self._size

    def push(self, w):
        if self.capacity is None and self._size == len(self._data):
            self._data = np.concatenate([self._data, np.zeros_like(self._data)])
        self._data[self._next] = w
        self._next += 1
        if self.capacity is not None:
            self._next %= self.capacity
        self._size = min(self._size + 1, len(self._data))

    def contents(self):
        return self._data[:self._size]

    def sample(self, rng, size):
        """Uniform draws with replacement."""
        if self._size == 0:
            raise EmptyBufferError("noise buffer is empty")
        return self._data[rng.integers(self._size, size=size)]


def sample_path(model, rng, cap=DEFAULT_HORIZON_CAP, source=None):
    """Draw ``tau`` then ``tau`` noise rows from the model or from ``source``.

    ``source`` may be a :class:`NoiseBuffer` or :class:`EmpiricalNoiseDist`.
    """
    tau = sample_horizon(model.gamma, rng, cap)
    if source is None:
        noises = model.sample_noise(rng, tau)
    else:
        noises = source.sample(rng, tau)
    return SamplePath(np.asarray(noises))


@dataclass
class PenaltyContext:
    """A penalty function built from ``phi`` plus the source of its expectations.

    Use the constructors :meth:`exact`, :meth:`fresh_batch`,
    :meth:`fixed_batch` and :meth:`empirical` rather than the raw initializer.
    """

    model: object
    phi: np.ndarray
    mode: str = "exact"
    K: int = 0
    batch: np.ndarray | None = None
    dist: EmpiricalNoiseDist | None = None
    rng: np.random.Generator | None = None
    reward_mode: str = "expected"
    policy: np.ndarray = field(init=False, repr=False)
    vphi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown expectation mode {self.mode!r}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        model = self.model
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (model.n_states, model.n_actions):
            raise ValueError(f"phi has shape {phi.shape}, expected "
                             f"{(model.n_states, model.n_actions)}")
        # terminal states play the role of the absorbing state
        phi[model.terminal] = 0.0
        self.phi = phi
        self.policy = model.greedy_policy(phi)
        self.vphi = phi[np.arange(model.n_states), self.policy]
        self._fixed = None

    @classmethod
    def exact(cls, model, phi, reward_mode="expected"):
        require_enumerable(model)
        return cls(model, phi, "exact", reward_mode=reward_mode)

    @classmethod
    def fresh_batch(cls, model, phi, K, rng, reward_mode="expected"):
        if K < 1:
            raise ValueError("batch size K must be >= 1")
        return cls(model, phi, "fresh-batch", K=K, rng=rng, reward_mode=reward_mode)

    @classmethod
    def fixed_batch(cls, model, phi, batch, reward_mode="expected"):
        batch = np.asarray(batch)
        if len(batch) < 1:
            raise ValueError("batch must be non-empty")
        return cls(model, phi, "fixed-batch", K=len(batch), batch=batch, reward_mode=reward_mode)

    @classmethod
    def empirical(cls, model, phi, dist, reward_mode="expected"):
        require_enumerable(model)
        if dist.n == 0:
            raise EmptyBufferError("empirical penalty needs at least one observation")
        return cls(model, phi, "empirical", dist=dist, reward_mode=reward_mode)

    # -- expectation sources --------------------------------------------------------
    def _weighted_outcomes(self):
        """``(outcomes, weights)`` for one evaluation of the expectation."""
        if self.mode == "exact":
            return self.model.support(), self.model.probs
        if self.mode == "fixed-batch":
            return self.batch, np.full(len(self.batch), 1.0 / len(self.batch))
        if self.mode == "empirical":
            probs = self.dist.probs
            seen = np.flatnonzero(probs)
            return seen[:, None], probs[seen]
        return self.model.sample_noise(self.rng, self.K), np.full(self.K, 1.0 / self.K)

    def _tables(self, outcomes, weights):
        """All-pairs ``E[phi(f, pi(f))]`` and ``E[g]`` for one set of outcomes."""
        ns, g = self.model.step_tables(outcomes)            # (M, S, A)
        e_next = np.tensordot(weights, self.vphi[ns], axes=1)
        e_rew = np.tensordot(weights, g, axes=1)
        return e_next, e_rew

    def step_expectations(self, tau):
        """Per-step ``(E[phi(next)], E[g])`` tables for a path of length ``tau``.

        Fresh-batch mode draws a new batch per step; every other mode shares
        one evaluation across the whole path.
        """
        if self.mode == "fresh-batch":
            return [self._tables(*self._weighted_outcomes()) for _ in range(tau)]
        if self._fixed is None:
            self._fixed = self._tables(*self._weighted_outcomes())
        return [self._fixed] * tau

    def expectation_at(self, s, a, outcomes=None, weights=None):
        """Scalar ``(E[phi(next)], E[g])`` at one pair, computed with ``model.step``."""
        if outcomes is None:
            outcomes, weights = self._weighted_outcomes()
        e_next = e_rew = 0.0
        for w, p in zip(outcomes, weights):
            s2, g = self.model.step(s, a, w)
            e_next += p * self.vphi[s2]
            e_rew += p * g
        return e_next, e_rew


def penalty(ctx, s, a, w_next, is_final_step=False):
    """Penalty charged for taking ``a`` in ``s`` when the next noise is ``w_next``."""
    e_next, _ = ctx.expectation_at(s, a)
    if is_final_step:
        v_next = 0.0
    else:
        s2, _ = ctx.model.step(s, a, w_next)
        v_next = ctx.vphi[s2]
    return v_next - ctx.model.gamma * e_next


class _ScalarStep:
    """Lazily cached scalar expectations for one step of a path."""

    def __init__(self, ctx, outcomes, weights):
        self.ctx = ctx
        self.outcomes = outcomes
        self.weights = weights
        self._cache = {}

    def __call__(self, s, a):
        key = (s, a)
        if key not in self._cache:
            self._cache[key] = self.ctx.expectation_at(s, a, self.outcomes, self.weights)
        return self._cache[key]


def _scalar_steps(ctx, tau):
    if ctx.mode == "fresh-batch":
        return [_ScalarStep(ctx, *ctx._weighted_outcomes()) for _ in range(tau)]
    shared = _ScalarStep(ctx, *ctx._weighted_outcomes())
    return [shared] * tau


def _step_base(ctx, steps, path, t, s, a):
    """Reward minus penalty at step ``t``; shared verbatim by both recursions."""
    model = ctx.model
    w = path.noises[t]
    s2, g = model.step(s, a, w)
    e_next, e_rew = steps[t](s, a)
    final = t == path.tau - 1
    v_next = 0.0 if final else ctx.vphi[s2]
    reward = e_rew if ctx.reward_mode == "expected" else g
    return reward - (v_next - model.gamma * e_next), s2


def _upper_scalar(ctx, steps, path, s0, a0):
    model = ctx.model
    tau = path.tau
    # forward: states reachable at every layer under some action sequence
    layers = [{s0}]
    for t in range(tau - 1):
        w = path.noises[t]
        acts = (lambda s: [a0]) if t == 0 else (lambda s: model.feasible_actions[s])
        layers.append({model.step(s, a, w)[0] for s in layers[t] for a in acts(s)})
    v_next = {}
    for t in range(tau - 1, -1, -1):
        final = t == tau - 1
        v_here = {}
        for s in layers[t]:
            acts = [a0] if t == 0 else model.feasible_actions[s]
            best = -np.inf
            for a in acts:
                base, s2 = _step_base(ctx, steps, path, t, s, a)
                q = base if final else base + v_next[s2]
                best = max(best, q)
            v_here[s] = best
        v_next = v_here
    return float(v_next[s0])


def _lower_scalar(ctx, steps, path, s0, a0):
    bases = []
    s, a = s0, a0
    for t in range(path.tau):
        base, s2 = _step_base(ctx, steps, path, t, s, a)
        bases.append(base)
        s, a = s2, int(ctx.policy[s2])
    total = 0.0
    for base in reversed(bases):
        total = base + total
    return float(total)


def inner_dp_upper(model, path, ctx, s0, a0):
    """Perfect-information value of ``(s0, a0)`` on ``path`` after penalties."""
    _check_model(model, ctx)
    return _upper_scalar(ctx, _scalar_steps(ctx, path.tau), path, s0, a0)


def inner_dp_lower(model, path, ctx, s0, a0):
    """Penalized return of the greedy policy for ``phi`` along ``path``."""
    _check_model(model, ctx)
    return _lower_scalar(ctx, _scalar_steps(ctx, path.tau), path, s0, a0)


def bound_pair(model, path, ctx, s0, a0):
    """Upper and lower inner-DP values on one path with shared expectations."""
    _check_model(model, ctx)
    steps = _scalar_steps(ctx, path.tau)
    return BoundPair(_upper_scalar(ctx, steps, path, s0, a0),
                     _lower_scalar(ctx, steps, path, s0, a0))


def bound_tables(model, path, ctx):
    """Upper and lower inner-DP values for every ``(s, a)`` along one path.

    Returns two ``(S, A)`` tables; ``upper >= lower`` entrywise.
    """
    _check_model(model, ctx)
    tau = path.tau
    gamma = model.gamma
    expectations = ctx.step_expectations(tau)
    ns_path, g_path = model.step_tables(path.noises)
    rows = np.arange(model.n_states)
    upper = lower = None
    for t in range(tau - 1, -1, -1):
        e_next, e_rew = expectations[t]
        ns = ns_path[t]
        reward = e_rew if ctx.reward_mode == "expected" else g_path[t]
        if t == tau - 1:
            base = reward + gamma * e_next
            upper = base
            lower = base.copy()
            continue
        base = reward - (ctx.vphi[ns] - gamma * e_next)
        v_up = model.masked_max(upper)
        v_low = lower[rows, ctx.policy]
        upper = base + v_up[ns]
        lower = base + v_low[ns]
    return upper, lower


def mc_bound_tables(model, ctx, n_paths, rng, cap=DEFAULT_HORIZON_CAP, source=None):
    """Monte Carlo means and standard errors of both bound tables.

    Returns ``(upper_mean, lower_mean, upper_se, lower_se)``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    shape = (model.n_states, model.n_actions)
    su, sl = np.zeros(shape), np.zeros(shape)
    su2, sl2 = np.zeros(shape), np.zeros(shape)
    for _ in range(n_paths):
        path = sample_path(model, rng, cap, source)
        up, low = bound_tables(model, path, ctx)
        su += up
        sl += low
        su2 += up * up
        sl2 += low * low
    mu, ml = su / n_paths, sl / n_paths
    if n_paths > 1:
        var_u = np.maximum(su2 - n_paths * mu * mu, 0.0) / (n_paths - 1)
        var_l = np.maximum(sl2 - n_paths * ml * ml, 0.0) / (n_paths - 1)
    else:
        var_u = var_l = np.zeros(shape)
    return mu, ml, np.sqrt(var_u / n_paths), np.sqrt(var_l / n_paths)


def mc_bound_estimate(model, ctx, s0, a0, n_paths, rng, cap=DEFAULT_HORIZON_CAP):
    """Average of ``n_paths`` independent bound pairs at ``(s0, a0)``."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    ups = np.empty(n_paths)
    lows = np.empty(n_paths)
    for i in range(n_paths):
        path = sample_path(model, rng, cap)
        up, low = bound_tables(model, path, ctx)
        ups[i], lows[i] = up[s0, a0], low[s0, a0]
    ddof = 1 if n_paths > 1 else 0
    return MCEstimate(float(ups.mean()), float(lows.mean()),
                      float(ups.std(ddof=ddof) / np.sqrt(n_paths)),
                      float(lows.std(ddof=ddof) / np.sqrt(n_paths)),
                      n_paths)


def _check_model(model, ctx):
    if ctx.model is not model:
        if (model.n_states, model.n_actions) != (ctx.model.n_states, ctx.model.n_actions):
            raise UnsupportedModelError("penalty context was built for a different model")
