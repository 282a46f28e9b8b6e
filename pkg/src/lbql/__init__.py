"""Tabular lookahead-bounded Q-learning with benchmark MDPs, baselines and an experiment harness."""

from .agents import AGENTS, Hyperparams, make_agent
from .bounds import (
    BoundPair,
    EmpiricalNoiseDist,
    NoiseBuffer,
    PenaltyContext,
    SamplePath,
    bound_pair,
    bound_tables,
    inner_dp_lower,
    inner_dp_upper,
    mc_bound_estimate,
    penalty,
    sample_path,
)
from .dp import greedy_value, q_value_iteration, relative_error, solve_qstar
from .envs import ENVIRONMENTS, make_env
from .harness import RunConfig, run, sweep, time_to_thresholds
from .mdp import exploration_rate, learning_rate, project_interval, rho_bound, sample_horizon

__version__ = "0.1.0"
