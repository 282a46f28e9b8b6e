import csv
import io
import json
import math

import numpy as np
import pytest

from lbql.dp import greedy_policy
from lbql.envs import make_env
from lbql.errors import ConfigError, UnsupportedMetricError
from lbql.harness import (
    CSV_HEADER,
    RunConfig,
    RunLog,
    ThresholdReport,
    aggregate_csv,
    eval_performance,
    first_crossing,
    load_qstar,
    read_run_csv,
    run,
    run_csv,
    sweep,
    time_to_thresholds,
    write_qstar,
)

TABLE_1 = {
    "2-cs-r": dict(beta=0.01, kappa=40, K=20, m=10, delta=0.01, gamma=0.99),
    "2-cs": dict(beta=0.01, kappa=40, K=20, m=15, delta=0.01, gamma=0.95),
    "4-cs": dict(beta=0.01, kappa=1000, K=20, m=200, delta=0.01, gamma=0.95),
    "wg": dict(beta=0.2, kappa=100, K=10, m=10, delta=0.01, gamma=0.9),
    "sg": dict(beta=0.2, kappa=500, K=20, m=20, delta=0.05, gamma=0.95),
}


@pytest.mark.parametrize("env", sorted(TABLE_1))
def test_defaults_follow_table(env):
    cfg = RunConfig(env=env)
    hp = cfg.hyperparams()
    expected = TABLE_1[env]
    for key in ("beta", "kappa", "K", "m", "delta"):
        assert getattr(hp, key) == expected[key]
    assert cfg.model().gamma == expected["gamma"]
    assert hp.r == 0.5 and hp.e == (0.4 if env == "4-cs" else 0.5)
    assert hp.init == ("zeros" if env == "sg" else "uniform")


def test_overrides_and_validation(tmp_path):
    cfg = RunConfig(env="2-cs", beta=0.3, seeds=3)
    assert cfg.hyperparams().beta == 0.3 and cfg.seeds == [0, 1, 2]
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"env": "2-cs", "colour": "red"})
    with pytest.raises(ConfigError):
        RunConfig(env="mars")
    with pytest.raises(ConfigError):
        RunConfig(agent="sarsa")
    with pytest.raises(ConfigError):
        RunConfig(steps=-1)
    with pytest.raises(ConfigError):
        RunConfig(r=0.0)
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"env": "wg", "agent": "ql", "steps": 7}))
    assert RunConfig.from_json(path).agent == "ql"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.from_json(path)


def test_zero_steps_header_only(tmp_path):
    log = run(RunConfig(env="2-cs", steps=0, out=str(tmp_path)))
    assert log.runs[0].steps == 0
    assert (tmp_path / "2-cs-lbql-s0.csv").read_text() == ",".join(CSV_HEADER) + "\n"


def test_csv_schema_and_missing_fields(tmp_path):
    run(RunConfig(env="wg", agent="ql", steps=50, seeds=[1], out=str(tmp_path)))
    rows = list(csv.reader((tmp_path / "wg-ql-s1.csv").open()))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 51
    assert [r[1] for r in rows[1:4]] == ["1", "2", "3"]
    assert all(r[4] == "" and r[6] == "" for r in rows[1:])  # no bound gap, no timing
    assert all(0 <= float(r[3]) for r in rows[1:])


def test_lbql_columns(tmp_path):
    log = run(RunConfig(env="2-cs", steps=300, out=str(tmp_path), timing=True))
    r = log.runs[0]
    assert r.bounds_updated.sum() > 0
    assert np.all(np.diff(r.bound_gap[r.bounds_updated]) <= 1e-9) or r.bound_gap[-1] < r.bound_gap[0]
    rows = list(csv.reader((tmp_path / "2-cs-lbql-s0.csv").open()))
    assert all(row[6] != "" for row in rows[1:])


def test_unsupported_relative_error():
    with pytest.raises(UnsupportedMetricError):
        run(RunConfig(env="4-cs", steps=5))
    log = run(RunConfig(env="4-cs", steps=5, rel_error=False))
    assert np.isnan(log.runs[0].rel_error).all()


def test_example1_relative_error_left_empty():
    with pytest.warns(UserWarning):
        log = run(RunConfig(env="example1", steps=10))
    assert np.isnan(log.runs[0].rel_error).all()


def test_relative_error_column_matches_direct_computation():
    cfg = RunConfig(env="2-cs", agent="sql", steps=200)
    log = run(cfg, keep_agents=True)
    from lbql.dp import relative_error
    from lbql.harness import qstar_for
    m = cfg.model()
    q = qstar_for(m)
    v_star = m.masked_max(q)
    assert log.runs[0].rel_error[-1] == pytest.approx(
        relative_error(log.runs[0].agent.value_table(), v_star, m))


def test_aggregate_ci():
    log = run(RunConfig(env="2-cs", agent="ql", steps=40, seeds=[0, 1, 2]))
    rows = list(csv.DictReader(io.StringIO(aggregate_csv(log))))
    assert len(rows) == 40
    for row in rows[::7]:
        vals = np.array([float(row[f"rel_error_2-cs-ql-s{s}"]) for s in range(3)])
        assert float(row["rel_error_mean"]) == pytest.approx(vals.mean())
        assert float(row["rel_error_ci95"]) == pytest.approx(1.96 * vals.std(ddof=1) / math.sqrt(3))
        assert row["mean_bound_gap_mean"] == ""


def test_byte_identical_outputs(tmp_path):
    for sub in ("a", "b"):
        run(RunConfig(env="wg", steps=1500, seeds=[0, 1], out=str(tmp_path / sub)))
    for name in ("wg-lbql-s0.csv", "wg-lbql-s1.csv", "aggregate.csv", "perf.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_perf_records(tmp_path):
    log = run(RunConfig(env="wg", agent="ql", steps=2000, eval_period=1000, eval_episodes=3,
                        window=100, out=str(tmp_path)))
    evals = log.runs[0].evals
    assert [e[0] for e in evals] == [1000, 2000]
    assert evals[0][1] == pytest.approx(-1.0)  # every wg step costs 1
    rows = list(csv.reader((tmp_path / "perf.csv").open()))
    assert rows[0] == ["run_id", "step", "window_reward", "eval_return"] and len(rows) == 3


# -- thresholds ---------------------------------------------------------------------------------------

def synthetic(curve, wall=None):
    n = len(curve)
    wall = np.ones(n) if wall is None else wall
    z = np.zeros(n)
    return RunLog("x", 0, z, np.asarray(curve, dtype=float), z, z.astype(bool), wall)


def test_threshold_examples():
    curve = np.linspace(0.95, 0.0, 20)
    k = first_crossing(curve, 0.5)
    rep = time_to_thresholds([synthetic(curve)])
    assert rep.n[0.5] == k == 10
    assert rep.t[0.5] == pytest.approx(10 / 1000)
    flat = time_to_thresholds([synthetic([0.3] * 50)])
    assert flat.n[0.5] == 1 and flat.n[0.2] is None
    assert flat.row()[:4] == ["1.0", "0.001", "-", "-"]


def test_threshold_average_and_never_reached():
    a = synthetic([0.6, 0.4, 0.1, 0.04, 0.005])
    b = synthetic([0.45, 0.3, 0.3, 0.15, 0.1])
    rep = time_to_thresholds([a, b])
    assert rep.n[0.5] == 1.5 and rep.n[0.2] == 3.5
    assert rep.n[0.05] is None and rep.n[0.01] is None


def test_threshold_monotone():
    rng = np.random.default_rng(0)
    for _ in range(20):
        curve = np.abs(rng.normal(size=300)).cumsum()[::-1] / 50
        rep = time_to_thresholds([synthetic(curve)])
        ns = [rep.n[t] for t in rep.thresholds if rep.n[t] is not None]
        assert ns == sorted(ns)


def test_threshold_needs_relative_error():
    with pytest.raises(UnsupportedMetricError):
        time_to_thresholds([synthetic([math.nan] * 4)])


# -- sweep ------------------------------------------------------------------------------------------

def test_sweep_shape_and_determinism(tmp_path):
    base = RunConfig(env="2-cs", steps=300, seeds=[0, 1], eval_period=0)
    kwargs = dict(agents=("lbql", "ql", "bcql"), e_grid=(0.4, 0.6), r_grid=(0.5, 0.7, 0.9))
    text = sweep(base, out=tmp_path / "s.csv", **kwargs)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["agent", "e", "r", "n50", "t50", "n20", "t20", "n5", "t5", "n1", "t1"]
    assert len(rows) - 1 == 3 * 2 * 3
    assert sweep(base, **kwargs) == text == (tmp_path / "s.csv").read_text()


def test_sweep_rejects_empty_grid():
    with pytest.raises(ConfigError):
        sweep(RunConfig(env="2-cs"), e_grid=())


# -- evaluation ---------------------------------------------------------------------------------------

def test_eval_optimal_example1(qstar):
    m = make_env("example1")
    ret = eval_performance(qstar("example1"), m, 1000, 1000, np.random.default_rng(0))
    # V*(A) = 0; the standard error of the undiscounted return is well below 0.5 here
    assert ret >= -0.5


def test_eval_random_q_not_better_than_optimal(qstar):
    m = make_env("wg")
    rng = np.random.default_rng(1)
    best = eval_performance(qstar("wg"), m, 50, 200, rng)
    rand = eval_performance(rng.normal(size=(70, 4)), m, 50, 200, rng)
    assert rand <= best


def test_eval_rejects_zero_episodes():
    with pytest.raises(ValueError):
        eval_performance(np.zeros((3, 2)), make_env("example1"), 0, 10, np.random.default_rng(0))


# -- files ------------------------------------------------------------------------------------------

def test_qstar_roundtrip(tmp_path, qstar):
    m = make_env("2-cs-r")
    path = tmp_path / "q.csv"
    write_qstar(path, m, qstar("2-cs-r"))
    np.testing.assert_array_equal(load_qstar(path, m), qstar("2-cs-r"))
    with pytest.raises(ConfigError):
        load_qstar(path, make_env("2-cs"))


def test_read_run_csv_roundtrip(tmp_path):
    log = run(RunConfig(env="2-cs", steps=100, out=str(tmp_path)))
    back = read_run_csv(tmp_path / "2-cs-lbql-s0.csv")
    np.testing.assert_array_equal(back.rel_error, log.runs[0].rel_error)
    np.testing.assert_array_equal(back.bounds_updated, log.runs[0].bounds_updated)
    assert run_csv(log.runs[0]) == (tmp_path / "2-cs-lbql-s0.csv").read_text()
