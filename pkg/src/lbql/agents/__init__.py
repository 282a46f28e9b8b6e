"""Learning agents, registered under their CLI names."""

from __future__ import annotations

from ..errors import ConfigError
from .base import Agent, Hyperparams, Transition, initial_q, ql_update, select_action
from .baselines import (
    BiasCorrectedQLearning,
    DoubleQLearning,
    QLearning,
    SpeedyQLearning,
    expected_max_normal,
)
from .lbql import LBQL, InvariantViolation, LBQLExact, LBQLIdeal

AGENTS = {
    "lbql": LBQL,
    "lbql-ideal": LBQLIdeal,
    "lbql-exact": LBQLExact,
    "ql": QLearning,
    "double-ql": DoubleQLearning,
    "sql": SpeedyQLearning,
    "bcql": BiasCorrectedQLearning,
}


def make_agent(name, model, hp=None, seed=0):
    if name not in AGENTS:
        raise ConfigError(f"unknown agent {name!r}; choose from {sorted(AGENTS)}")
    return AGENTS[name](model, hp, seed)


__all__ = [
    "AGENTS",
    "make_agent",
    "Agent",
    "Hyperparams",
    "Transition",
    "initial_q",
    "ql_update",
    "select_action",
    "QLearning",
    "DoubleQLearning",
    "SpeedyQLearning",
    "BiasCorrectedQLearning",
    "expected_max_normal",
    "LBQL",
    "LBQLIdeal",
    "LBQLExact",
    "InvariantViolation",
]
