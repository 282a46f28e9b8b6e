"""Experiment orchestration: seeded runs, per-step metrics, CSV output, threshold tables."""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .agents import AGENTS, LBQL, Hyperparams, make_agent
from .dp import greedy_value, solve_qstar
from .envs import ENVIRONMENTS, make_env
from .errors import ConfigError, UnsupportedMetricError

CSV_HEADER = ("run_id", "step", "reward", "rel_error", "mean_bound_gap", "bounds_updated", "wall_ms")
PERF_HEADER = ("run_id", "step", "window_reward", "eval_return")
THRESHOLDS = (0.5, 0.2, 0.05, 0.01)
SWEEP_E = (0.4, 0.5, 0.6)
SWEEP_R = (0.5, 0.6, 0.7, 0.8, 0.9)

# per-environment defaults for the bound phase and schedules
ENV_DEFAULTS = {
    "example1": dict(beta=0.05, kappa=200, K=20, m=1, delta=0.0, r=0.5, e=0.5, init="zeros"),
    "2-cs-r": dict(beta=0.01, kappa=40, K=20, m=10, delta=0.01, r=0.5, e=0.5),
    "2-cs": dict(beta=0.01, kappa=40, K=20, m=15, delta=0.01, r=0.5, e=0.5),
    "4-cs": dict(beta=0.01, kappa=1000, K=20, m=200, delta=0.01, r=0.5, e=0.4),
    "wg": dict(beta=0.2, kappa=100, K=10, m=10, delta=0.01, r=0.5, e=0.5),
    "sg": dict(beta=0.2, kappa=500, K=20, m=20, delta=0.05, r=0.5, e=0.5, init="zeros"),
}


@dataclass
class RunConfig:
    """One experiment: an environment, an agent, a step budget and a list of seeds.

    Hyperparameters left as ``None`` take the environment defaults.
    """

    env: str = "example1"
    agent: str = "lbql"
    steps: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    r: float | None = None
    e: float | None = None
    alpha: float | None = None
    epsilon: float | None = None
    beta: float | None = None
    beta_exponent: float | None = None
    K: int | None = None
    kappa: int | None = None
    m: int | None = None
    delta: float | None = None
    gamma: float | None = None
    init: str | None = None
    project_all: bool = False
    horizon_cap: int | None = None
    rel_error: bool = True
    window: int = 500
    eval_period: int = 1000
    eval_episodes: int = 10
    eval_horizon: int = 1000
    timing: bool = False
    out: str | None = None
    qstar: str | None = None

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.env!r}")
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}")
        if not isinstance(self.steps, int) or self.steps < 0:
            raise ConfigError(f"steps must be a non-negative integer, got {self.steps!r}")
        if isinstance(self.seeds, int):
            self.seeds = list(range(self.seeds))
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.window < 1 or self.eval_period < 0 or self.eval_episodes < 0:
            raise ConfigError("window must be positive; eval settings non-negative")
        self.hyperparams()

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data)

    def hyperparams(self):
        values = dict(ENV_DEFAULTS[self.env])
        for name in Hyperparams.field_names():
            v = getattr(self, name, None)
            if v is not None and name != "project_all":
                values[name] = v
        values["project_all"] = self.project_all
        return Hyperparams(**values)

    def model(self):
        return make_env(self.env, self.gamma)

    def run_id(self, seed):
        return f"{self.env}-{self.agent}-s{seed}"


# -- Q* cache -----------------------------------------------------------------------

_QSTAR = {}


def qstar_for(model):
    key = (model.name, model.gamma)
    if key not in _QSTAR:
        if not getattr(model, "enumerable", False):
            raise UnsupportedMetricError(
                f"no exact Q* for {model.name!r}; disable the relative-error metric")
        _QSTAR[key] = solve_qstar(model)
    return _QSTAR[key]


def load_qstar(path, model):
    try:
        q = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1, usecols=(0, 1, 2))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read Q* file {path}: {exc}") from exc
    if q.shape != (model.n_states * model.n_actions, 3):
        raise ConfigError(f"Q* file {path} does not match {model.name!r}")
    out = np.zeros((model.n_states, model.n_actions))
    out[q[:, 0].astype(int), q[:, 1].astype(int)] = q[:, 2]
    return out


def write_qstar(path, model, q):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("state", "action", "q", "v"))
        v = greedy_value(q, model)
        for s in range(model.n_states):
            for a in range(model.n_actions):
                w.writerow((s, a, repr(float(q[s, a])), repr(float(v[s]))))


# -- metrics --------------------------------------------------------------------------

@dataclass
class RunLog:
    """Per-step arrays of one seed; ``nan`` marks a missing metric."""

    run_id: str
    seed: int
    reward: np.ndarray
    rel_error: np.ndarray
    bound_gap: np.ndarray
    bounds_updated: np.ndarray
    wall_ms: np.ndarray
    evals: list = field(default_factory=list)
    agent: object = None

    @property
    def steps(self):
        return len(self.reward)


@dataclass
class MetricsLog:
    config: RunConfig
    runs: list

    def __iter__(self):
        return iter(self.runs)


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def run_seed(config, seed, v_star=None, keep_agent=False):
    """Train one fresh agent for ``config.steps`` steps and record every step."""
    model = config.model()
    agent = make_agent(config.agent, model, config.hyperparams(), seed)
    eval_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    n = config.steps
    reward = np.empty(n)
    rel = np.full(n, np.nan)
    gap = np.full(n, np.nan)
    updated = np.zeros(n, dtype=bool)
    wall = np.empty(n)
    is_lbql = isinstance(agent, LBQL)
    v = None
    if v_star is not None:
        v = greedy_value(agent.value_table(), model)
        norm = float(np.linalg.norm(v_star))
    current_gap = agent.bound_gap() if is_lbql else math.nan
    window = deque()
    window_sum = 0.0
    evals = []
    for i in range(n):
        t0 = time.perf_counter()
        tr = agent.step()
        wall[i] = (time.perf_counter() - t0) * 1e3
        reward[i] = tr.reward
        updated[i] = tr.bounds_updated
        if v is not None:
            # only row s of the scored table can have changed
            v[tr.state] = model.state_max(agent.value_table(), tr.state)
            rel[i] = float(np.linalg.norm(v - v_star)) / norm
        if is_lbql:
            if tr.bounds_updated:
                current_gap = agent.bound_gap()
            gap[i] = current_gap
        window.append(tr.reward)
        window_sum += tr.reward
        if len(window) > config.window:
            window_sum -= window.popleft()
        step = i + 1
        if config.eval_period and step % config.eval_period == 0:
            ev = math.nan
            if config.eval_episodes:
                ev = eval_performance(agent.acting_table(), model, config.eval_episodes,
                                      config.eval_horizon, eval_rng)
            evals.append((step, window_sum / len(window), ev))
    return RunLog(config.run_id(seed), seed, reward, rel, gap, updated, wall,
                  evals=evals, agent=agent if keep_agent else None)


def eval_performance(table, model, episodes, horizon, rng):
    """Mean undiscounted return of greedy rollouts from ``model.reset``.

    ``table`` may be a Q table or an agent (its acting table is used).
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if hasattr(table, "acting_table"):
        table = table.acting_table()
    policy = model.greedy_policy(np.asarray(table, dtype=float))
    total = 0.0
    for _ in range(episodes):
        s = model.reset(rng)
        for _ in range(horizon):
            if model.terminal[s]:
                break
            s, g = model.step(s, int(policy[s]), model.sample_noise_one(rng))
            total += g
    return total / episodes


def run(config, v_star=None, keep_agents=False):
    """Train every seed of ``config``; write CSVs when ``config.out`` is set.

    Relative error needs ``Q*``: it is loaded from ``config.qstar`` or solved
    exactly, and requesting it for a sampling-only model raises
    :class:`UnsupportedMetricError`.
    """
    model = config.model()
    if config.rel_error and v_star is None:
        q_star = load_qstar(config.qstar, model) if config.qstar else qstar_for(model)
        v_star = greedy_value(q_star, model)
        if not np.any(v_star):
            warnings.warn(f"V* of {model.name!r} is identically zero; relative error left empty",
                          stacklevel=2)
            v_star = None
    if not config.rel_error:
        v_star = None
    log = MetricsLog(config, [run_seed(config, seed, v_star, keep_agents) for seed in config.seeds])
    if config.out:
        write_outputs(log, config.out)
    return log


# -- CSV output -------------------------------------------------------------------------

def run_csv(run_log, timing=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(run_log.steps):
        w.writerow((run_log.run_id, i + 1, _fmt(run_log.reward[i]), _fmt(run_log.rel_error[i]),
                    _fmt(run_log.bound_gap[i]), int(run_log.bounds_updated[i]),
                    _fmt(run_log.wall_ms[i]) if timing else ""))
    return buf.getvalue()


def ci95(values, axis=0):
    """Normal-approximation half width ``1.96 * sd / sqrt(n)`` (``nan`` for one value)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n < 2:
        return np.full(np.delete(values.shape, axis), np.nan)
    return 1.96 * values.std(axis=axis, ddof=1) / math.sqrt(n)


AGG_METRICS = ("reward", "rel_error", "mean_bound_gap")


def aggregate_csv(log):
    runs = log.runs
    steps = runs[0].steps if runs else 0
    cols = {"reward": [r.reward for r in runs],
            "rel_error": [r.rel_error for r in runs],
            "mean_bound_gap": [r.bound_gap for r in runs]}
    header = ["step"]
    blocks = []
    for metric in AGG_METRICS:
        header += [f"{metric}_{r.run_id}" for r in runs] + [f"{metric}_mean", f"{metric}_ci95"]
        data = np.array(cols[metric]).reshape(len(runs), steps)
        if np.isnan(data).all():
            mean = np.full(steps, np.nan)
            half = np.full(steps, np.nan)
        else:
            mean = data.mean(axis=0)
            half = ci95(data)
        blocks.append((data, mean, half))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(steps):
        row = [i + 1]
        for data, mean, half in blocks:
            row += [_fmt(x) for x in data[:, i]] + [_fmt(mean[i]), _fmt(half[i])]
        w.writerow(row)
    return buf.getvalue()


def perf_csv(log):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PERF_HEADER)
    for r in log.runs:
        for step, window_reward, ev in r.evals:
            w.writerow((r.run_id, step, _fmt(window_reward), _fmt(ev)))
    return buf.getvalue()


def write_outputs(log, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in log.runs:
        p = out / f"{r.run_id}.csv"
        p.write_text(run_csv(r, log.config.timing))
        paths.append(p)
    (out / "aggregate.csv").write_text(aggregate_csv(log))
    (out / "perf.csv").write_text(perf_csv(log))
    (out / "config.json").write_text(json.dumps(log.config.to_dict(), indent=2, sort_keys=True) + "\n")
    return paths


def read_run_csv(path):
    """Load a per-seed CSV back into a :class:`RunLog` (missing fields become ``nan``)."""
    def num(x):
        return float(x) if x != "" else math.nan
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ConfigError(f"{path} is not a run log")
        rows = list(reader)
    run_id = rows[0][0] if rows else Path(path).stem
    arr = lambda j: np.array([num(r[j]) for r in rows])
    return RunLog(run_id, -1, arr(2), arr(3), arr(4), arr(5).astype(bool), arr(6))


# -- thresholds ----------------------------------------------------------------------------

@dataclass
class ThresholdReport:
    """Mean first-crossing step ``n`` and time ``t`` (seconds) per threshold.

    ``None`` stands for a threshold that some seed never reached ("-").
    """

    thresholds: tuple
    n: dict
    t: dict

    def row(self):
        cells = []
        for thr in self.thresholds:
            n, t = self.n[thr], self.t[thr]
            cells.append("-" if n is None else f"{n:.1f}")
            cells.append("-" if t is None else f"{t:.3f}")
        return cells


def first_crossing(rel_error, threshold):
    """1-based index of the first step with ``rel_error <= threshold`` (or ``None``)."""
    hits = np.flatnonzero(np.asarray(rel_error) <= threshold)
    return int(hits[0]) + 1 if hits.size else None


def time_to_thresholds(log, thresholds=THRESHOLDS):
    """Average over seeds of the first step (and elapsed time) below each threshold."""
    runs = list(log)
    if not runs:
        raise ValueError("no runs to report on")
    n_out, t_out = {}, {}
    for thr in thresholds:
        ns, ts = [], []
        for r in runs:
            if np.isnan(r.rel_error).all():
                raise UnsupportedMetricError("log has no relative-error column")
            k = first_crossing(r.rel_error, thr)
            if k is None:
                break
            ns.append(k)
            ts.append(float(np.sum(r.wall_ms[:k])) / 1e3)
        else:
            n_out[thr] = float(np.mean(ns))
            t_out[thr] = None if any(math.isnan(x) for x in ts) else float(np.mean(ts))
            continue
        n_out[thr] = t_out[thr] = None
    return ThresholdReport(tuple(thresholds), n_out, t_out)


def _pct(thr):
    return f"{thr * 100:g}"


def threshold_header(thresholds=THRESHOLDS):
    cols = []
    for thr in thresholds:
        cols += [f"n{_pct(thr)}", f"t{_pct(thr)}"]
    return cols


def sweep(base, agents=("lbql", "ql"), e_grid=SWEEP_E, r_grid=SWEEP_R, thresholds=THRESHOLDS,
          out=None, progress=None):
    """Threshold report for every ``(agent, e, r)`` cell; returns the CSV text.

    Times are reported only when ``base.timing`` is set, which keeps the CSV a
    pure function of configuration and seeds otherwise.
    """
    if not agents or not e_grid or not r_grid:
        raise ConfigError("sweep grid must be non-empty")
    model = base.model()
    v_star = greedy_value(load_qstar(base.qstar, model) if base.qstar else qstar_for(model), model)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agent", "e", "r"] + threshold_header(thresholds))
    for agent in agents:
        for e in e_grid:
            for r in r_grid:
                cfg = base.replace(agent=agent, e=e, r=r, out=None)
                log = MetricsLog(cfg, [run_seed(cfg, s, v_star) for s in cfg.seeds])
                rep = time_to_thresholds(log, thresholds)
                cells = rep.row()
                if not base.timing:
                    cells = [c if j % 2 == 0 else "" for j, c in enumerate(cells)]
                w.writerow([agent, f"{e:g}", f"{r:g}"] + cells)
                if progress:
                    progress(agent, e, r, rep)
    text = buf.getvalue()
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    return text
