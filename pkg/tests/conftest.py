import numpy as np
import pytest

from lbql.envs import make_env
from lbql.harness import qstar_for
from lbql.mdp import EnumerableMDP

ENUMERABLE = ("example1", "wg", "sg", "2-cs-r", "2-cs")


@pytest.fixture(scope="session")
def qstar():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = qstar_for(make_env(name))
        return cache[name]
    return get


class OneStateMDP(EnumerableMDP):
    """One state, one action, reward 1, deterministic."""

    name = "one-state"

    def __init__(self, gamma=0.5):
        super().__init__(1, 1, gamma, [1.0])

    def transition(self, s, a, k):
        return 0, 1.0


class CoinMDP(EnumerableMDP):
    """One state, one action, reward +1 or -1 on a fair coin."""

    name = "coin"

    def __init__(self, gamma=0.5):
        super().__init__(1, 1, gamma, [0.5, 0.5])

    def transition(self, s, a, k):
        return 0, 1.0 if k == 0 else -1.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
