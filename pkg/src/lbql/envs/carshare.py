"""Car-sharing benchmarks: repositioning and spatial pricing.

Two-station problems track the number of cars at station 1 out of a fleet of
12.  The four-station pricing problem tracks the full allocation of a fleet of
20; its noise (demand shocks plus the destination of every fulfilled rental)
has an astronomically large support, so that model is sampling-only.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..mdp import EnumerableMDP, FiniteMDP

FLEET_2 = 12


class CarshareRepositioning(EnumerableMDP):
    """Two stations, one-way rentals, repositioning before demand is revealed.

    Action index ``a`` moves ``r = a - 12`` cars from station 1 to station 2
    (negative ``r`` moves the other way); ``r`` is feasible when
    ``s - 12 <= r <= s``.  Infeasible indices behave like the nearest feasible
    move but are masked out of every policy.
    """

    name = "2-cs-r"
    prices = (3.5, 4.0)
    lost_sales = (2.0, 2.0)
    reposition_cost = (1.0, 1.5)
    demand_support = tuple(range(3, 10))

    def __init__(self, gamma=0.99, fleet=FLEET_2):
        self.fleet = fleet
        self.moves = np.arange(-fleet, fleet + 1)
        nd = len(self.demand_support)
        s = np.arange(fleet + 1)[:, None]
        feasible = (self.moves[None, :] >= s - fleet) & (self.moves[None, :] <= s)
        super().__init__(fleet + 1, self.moves.size, gamma,
                         np.full(nd * nd, 1.0 / (nd * nd)), feasible=feasible)

    def decode_noise(self, code):
        i, j = divmod(int(code), len(self.demand_support))
        return self.demand_support[i], self.demand_support[j]

    def encode_noise(self, demands):
        d1, d2 = demands
        return (d1 - 3) * len(self.demand_support) + (d2 - 3)

    def transition(self, s, a, k):
        d1, d2 = self.decode_noise(k)
        r = min(max(int(self.moves[a]), s - self.fleet), s)
        w1 = min(d1, s - r)
        w2 = min(d2, self.fleet - s + r)
        p1, p2 = self.prices
        l1, l2 = self.lost_sales
        c1, c2 = self.reposition_cost
        reward = (p1 * w1 + p2 * w2 - l1 * (d1 - w1) - l2 * (d2 - w2)
                  - c1 * max(r, 0) + c2 * min(r, 0))
        return s - r + w2 - w1, reward

    def reset(self, rng):
        return int(rng.integers(self.n_states))


class CarsharePricing2(EnumerableMDP):
    """Two stations, one-way rentals, prices set through expected demands.

    Action ``(d1, d2)`` with ``d1 in 3..8`` and ``d2 in 3..9`` fixes prices
    ``p1 = 9 - d1`` and ``p2 = 10 - d2``; realized demand is ``d_i + eps_i``.
    """

    name = "2-cs"
    intercepts = (9, 10)
    lost_sales = (2.0, 2.0)
    shock_support = tuple(range(-3, 4))

    def __init__(self, gamma=0.95, fleet=FLEET_2):
        self.fleet = fleet
        self.actions = [(d1, d2) for d1 in range(3, 9) for d2 in range(3, 10)]
        ne = len(self.shock_support)
        super().__init__(fleet + 1, len(self.actions), gamma,
                         np.full(ne * ne, 1.0 / (ne * ne)))

    def decode_noise(self, code):
        i, j = divmod(int(code), len(self.shock_support))
        return self.shock_support[i], self.shock_support[j]

    def encode_noise(self, shocks):
        e1, e2 = shocks
        return (e1 + 3) * len(self.shock_support) + (e2 + 3)

    def encode_action(self, demands):
        return self.actions.index(tuple(demands))

    def prices_for(self, a):
        d1, d2 = self.actions[a]
        return self.intercepts[0] - d1, self.intercepts[1] - d2

    def transition(self, s, a, k):
        d1, d2 = self.actions[a]
        e1, e2 = self.decode_noise(k)
        p1, p2 = self.prices_for(a)
        D1, D2 = d1 + e1, d2 + e2
        w1 = min(D1, s)
        w2 = min(D2, self.fleet - s)
        l1, l2 = self.lost_sales
        reward = p1 * w1 + p2 * w2 - l1 * (D1 - w1) - l2 * (D2 - w2)
        return s - w1 + w2, float(reward)

    def reset(self, rng):
        return int(rng.integers(self.n_states))


class CarsharePricing4(FiniteMDP):
    """Four stations, fleet of 20, one-way and return trips.

    A noise row holds the demand shock of each station followed by
    ``max_demand`` destination codes per station; the first ``omega_i`` codes of
    station ``i`` give the destinations of its fulfilled rentals.  Codes are
    uniform over the stations, matching ``phi_ij = 0.25``.
    """

    name = "4-cs"
    n_stations = 4
    fleet = 20
    demand_levels = (3, 4)
    shock_support = tuple(range(-3, 4))
    # p_i = c_i - d_i; intercepts are assumed values
    intercepts = (9.0, 10.0, 9.0, 10.0)
    lost_sales = (1.7, 1.2, 1.5, 2.0)
    distances = np.array([
        [1.0, 1.8, 1.5, 1.4],
        [1.8, 1.0, 1.6, 1.1],
        [1.5, 1.6, 1.0, 1.2],
        [1.4, 1.1, 1.2, 1.0],
    ])

    def __init__(self, gamma=0.95):
        n = self.n_stations
        self.max_demand = max(self.demand_levels) + max(self.shock_support)
        self.states = np.array([c for c in itertools.product(range(self.fleet + 1), repeat=n)
                                if sum(c) == self.fleet], dtype=np.int64)
        self._lookup = np.full((self.fleet + 1,) * (n - 1), -1, dtype=np.int64)
        self._lookup[tuple(self.states[:, :-1].T)] = np.arange(len(self.states))
        self._lookup_flat = self._lookup.ravel()
        self.demands = np.array(list(itertools.product(self.demand_levels, repeat=n)), dtype=np.int64)
        self.prices = np.asarray(self.intercepts)[None, :] - self.demands
        self._lost = np.asarray(self.lost_sales)
        # revenue per rental out of station i, by destination j
        self._fare = self.prices[:, :, None] * self.distances[None, :, :]
        r_max = max(
            max(float((self.prices[a] * (self.demands[a] + 3) * self.distances.max(axis=1)).sum()),
                float((self._lost * (self.demands[a] + 3)).sum()))
            for a in range(len(self.demands)))
        super().__init__(len(self.states), len(self.demands), gamma, r_max,
                         noise_dim=n + n * self.max_demand)

    # -- encoding ---------------------------------------------------------------
    def encode_state(self, state):
        state = tuple(int(x) for x in state)
        if len(state) != self.n_stations or sum(state) != self.fleet or min(state) < 0:
            raise ValueError(f"invalid fleet allocation {state}")
        return int(self._lookup[state[:-1]])

    def decode_state(self, index):
        return tuple(int(x) for x in self.states[index])

    def decode_noise(self, w):
        w = np.asarray(w)
        n, m = self.n_stations, self.max_demand
        return {"shocks": tuple(int(x) for x in w[:n]),
                "destinations": w[n:].reshape(n, m).tolist()}

    # -- noise --------------------------------------------------------------------
    def sample_noise(self, rng, size):
        n, m = self.n_stations, self.max_demand
        shocks = rng.integers(self.shock_support[0], self.shock_support[-1] + 1, size=(size, n))
        dests = rng.integers(0, n, size=(size, n * m))
        return np.concatenate([shocks, dests], axis=1)

    def sample_noise_one(self, rng):
        return self.sample_noise(rng, 1)[0]

    # -- dynamics -----------------------------------------------------------------
    def _flows(self, w):
        """Cumulative destination counts ``C[i, k, j]`` over the first ``k`` codes."""
        n, m = self.n_stations, self.max_demand
        dest = np.asarray(w[n:]).reshape(n, m)
        onehot = dest[:, :, None] == np.arange(n)[None, None, :]
        counts = np.zeros((n, m + 1, n), dtype=np.int64)
        np.cumsum(onehot, axis=1, out=counts[:, 1:, :])
        return counts

    def step(self, s, a, w):
        n = self.n_stations
        state = self.states[s]
        demand = self.demands[a] + np.asarray(w[:n])
        served = np.minimum(demand, state)
        flows = self._flows(w)[np.arange(n), served]  # (i, j)
        reward = float((self._fare[a] * flows).sum() - (self._lost * (demand - served)).sum())
        nxt = state - served + flows.sum(axis=0)
        return int(self._lookup[tuple(nxt[:-1])]), reward

    def step_tables(self, ws):
        # Every term separates by station, so each outcome reduces to per-station
        # tables over (cars at station, action) gathered at the state components.
        ws = np.asarray(ws)
        n = self.n_stations
        x = np.arange(self.fleet + 1)[:, None, None]              # (X, 1, 1)
        place = self.fleet + 1
        weights = place ** np.arange(n - 2, -1, -1)                # linear index of s[:-1]
        out_ns = np.empty((len(ws), self.n_states, self.n_actions), dtype=np.int64)
        out_g = np.empty((len(ws), self.n_states, self.n_actions))
        for k, w in enumerate(ws):
            demand = self.demands + w[:n]                          # (A, n)
            served = np.minimum(demand[None], x)                   # (X, A, n)
            counts = self._flows(w)                                # (n, m+1, n)
            flows = counts[np.arange(n), served]                   # (X, A, n_from, n_to)
            net = (np.einsum("aij,xaij->xai", self._fare, flows)
                   - self._lost * (demand[None] - served))         # (X, A, n)
            lin = flows[..., :-1] @ weights                        # inflow part (X, A, n)
            lin[..., :-1] += (x - served[..., :-1]) * weights
            g = np.zeros((self.n_states, self.n_actions))
            idx = np.zeros((self.n_states, self.n_actions), dtype=np.int64)
            for i in range(n):
                col = self.states[:, i]
                g += net[col, :, i]
                idx += lin[col, :, i]
            out_g[k] = g
            out_ns[k] = self._lookup_flat[idx]
        return out_ns, out_g

    def reset(self, rng):
        return int(rng.integers(self.n_states))


def make_carshare_repositioning(gamma=0.99):
    return CarshareRepositioning(gamma=gamma)


def make_carshare_pricing_2(gamma=0.95):
    return CarsharePricing2(gamma=gamma)


def make_carshare_pricing_4(gamma=0.95):
    return CarsharePricing4(gamma=gamma)
