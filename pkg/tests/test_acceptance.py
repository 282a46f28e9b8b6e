"""Acceptance checks, one test per criterion.

Each test prints a ``PASS criterion N`` or ``FAIL criterion N`` line straight
to the terminal so the verdicts show up in ``pytest -v`` logs.
"""

import io
import time

import numpy as np
import pytest

from lbql.agents import make_agent
from lbql.bounds import (
    PenaltyContext,
    bound_tables,
    mc_bound_estimate,
    penalty,
    sample_path,
)
from lbql.cli import main as cli_main
from lbql.dp import q_value_iteration
from lbql.envs import make_env
from lbql.harness import RunConfig, qstar_for, run, time_to_thresholds

A, B = 0, 1
L_, R_ = 0, 1


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return report


def nonterminal_mask(model):
    return model.feasible & ~model.terminal[:, None]


# 1 ------------------------------------------------------------------------------------------------

def test_c01_exact_dp_oracle(verdict):
    m = make_env("example1")
    t0 = time.perf_counter()
    q = q_value_iteration(m, tol=1e-10)
    elapsed = time.perf_counter() - t0
    want = {(A, R_): 0.0, (B, R_): 0.0, (A, L_): -1.0, (B, L_): -1.0}
    err = max(abs(q[k] - v) for k, v in want.items())
    verdict(1, err < 1e-6 and elapsed < 1.0, f"max error {err:.2e}, {elapsed:.3f}s")


# 2 ------------------------------------------------------------------------------------------------

def test_c02_zero_variance_at_qstar(verdict):
    t0 = time.perf_counter()
    worst = {}
    for name in ("example1", "wg", "2-cs-r", "2-cs"):
        m = make_env(name)
        q = qstar_for(m)
        ctx = PenaltyContext.exact(m, q)
        rng = np.random.default_rng(2)
        pairs = np.argwhere(nonterminal_mask(m))
        pick = pairs[rng.choice(len(pairs), size=min(20, len(pairs)), replace=False)]
        err = 0.0
        for _ in range(100):
            up, low = bound_tables(m, sample_path(m, rng), ctx)
            s, a = pick.T
            err = max(err, np.abs(up[s, a] - q[s, a]).max(), np.abs(low[s, a] - q[s, a]).max())
        worst[name] = err
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-9 and elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(2, ok, f"worst |bound - Q*|: {detail}; {elapsed:.1f}s")


# 3 ------------------------------------------------------------------------------------------------

def test_c03_weak_duality_statistics(verdict):
    m = make_env("example1")
    q = qstar_for(m)
    rng = np.random.default_rng(3)
    phi = rng.normal(scale=2.0, size=q.shape)
    t0 = time.perf_counter()
    lines, ok = [], True
    for s, a in ((A, R_), (B, R_)):
        ctx = PenaltyContext.fresh_batch(m, phi, 20, rng)
        est = mc_bound_estimate(m, ctx, s, a, 10_000, rng)
        up_ok = est.upper >= q[s, a] - 3 * est.upper_se
        low_ok = est.lower <= q[s, a] + 3 * est.lower_se
        ok &= bool(up_ok and low_ok)
        lines.append(f"({'AB'[s]},R) U={est.upper:.3f}+-{est.upper_se:.3f} "
                     f"L={est.lower:.3f}+-{est.lower_se:.3f}")
    elapsed = time.perf_counter() - t0
    verdict(3, ok and elapsed < 60, "; ".join(lines) + f"; {elapsed:.1f}s")


# 4 ------------------------------------------------------------------------------------------------

def test_c04_dual_feasibility(verdict):
    worst = 0.0
    for name in ("example1", "wg"):
        m = make_env(name)
        rng = np.random.default_rng(4)
        for _ in range(10):
            ctx = PenaltyContext.exact(m, rng.normal(scale=5.0, size=(m.n_states, m.n_actions)))
            for s in range(m.n_states):
                for a in range(m.n_actions):
                    if not m.feasible[s, a]:
                        continue
                    cont = sum(p * penalty(ctx, s, a, k) for k, p in enumerate(m.probs))
                    stop = sum(p * penalty(ctx, s, a, k, True) for k, p in enumerate(m.probs))
                    worst = max(worst, abs(m.gamma * cont + (1 - m.gamma) * stop))
    verdict(4, worst < 1e-12, f"max |E[zeta]| = {worst:.1e}")


# 5 and 10 -------------------------------------------------------------------------------------------

def train_checked(env, seed, steps, probe_steps=(), on_step=None):
    """Train LBQL and count bound-ordering and projection violations."""
    cfg = RunConfig(env=env)
    model = cfg.model()
    agent = make_agent("lbql", model, cfg.hyperparams().replace(check_invariants=False), seed)
    violations = 0
    gaps = {}
    for i in range(1, steps + 1):
        tr = agent.step()
        if tr.bounds_updated and np.any(agent.lower > agent.upper):
            violations += 1
        s, a = tr.state, tr.action
        if not agent.lower[s, a] <= agent.qp[s, a] <= agent.upper[s, a]:
            violations += 1
        if on_step is not None:
            on_step(model, tr)
        if i in probe_steps:
            gaps[i] = agent.bound_gap()
    return agent, violations, gaps


CRITERION5_ENVS = ("2-cs-r", "2-cs", "4-cs", "wg", "sg")


@pytest.mark.slow
def test_c05_bound_consistency(verdict):
    counts = {}
    for env in CRITERION5_ENVS:
        steps = 100_000 if env == "4-cs" else 50_000
        total = 0
        for seed in range(3):
            _, bad, _ = train_checked(env, seed, steps)
            total += bad
        counts[env] = total
    detail = ", ".join(f"{k} {v}" for k, v in counts.items())
    verdict(5, sum(counts.values()) == 0, f"violations per env over 3 seeds: {detail}")


@pytest.mark.slow
def test_c10_carshare_four_stations(verdict):
    fleet_errors = []

    def conserve(model, tr):
        if tr.next_state < 0 or sum(model.decode_state(tr.next_state)) != model.fleet:
            fleet_errors.append(tr.step)

    _, bad, gaps = train_checked("4-cs", 0, 100_000, probe_steps=(10_000, 100_000),
                                 on_step=conserve)
    drop = 1.0 - gaps[100_000] / gaps[10_000]
    ok = bad == 0 and not fleet_errors and drop >= 0.5
    verdict(10, ok, f"invariant violations {bad}, fleet errors {len(fleet_errors)}, "
                    f"gap {gaps[10_000]:.0f} -> {gaps[100_000]:.0f} ({drop:.0%} lower)")


# 6 and 7 --------------------------------------------------------------------------------------------

def fmt(x):
    return "-" if x is None else f"{x:.1f}"


@pytest.mark.slow
def test_c06_table_reproduction(verdict):
    t0 = time.perf_counter()
    base = RunConfig(env="2-cs", seeds=5, eval_period=0)
    lb = time_to_thresholds(run(base.replace(agent="lbql", steps=80_000)))
    ql_steps = 300_000
    ql = time_to_thresholds(run(base.replace(agent="ql", steps=ql_steps)))
    elapsed = time.perf_counter() - t0
    n20, n1 = lb.n[0.2], lb.n[0.01]
    ok = n20 is not None and 4_020 <= n20 <= 16_080
    ok &= n1 is not None and 13_956 <= n1 <= 55_826
    if ql.n[0.01] is None:
        # every seed ran 3e5 steps without reaching 1%
        ratio_ok = n1 is not None and ql_steps >= 2 * n1
    else:
        ratio_ok = n1 is not None and ql.n[0.01] >= 2 * n1
    ok &= ratio_ok and elapsed < 900
    verdict(6, ok, f"LBQL n20={fmt(n20)} n1={fmt(n1)}; QL n1={fmt(ql.n[0.01])}; "
                   f"{elapsed:.0f}s")


@pytest.mark.slow
def test_c07_sensitivity_ordering(verdict):
    base = RunConfig(env="2-cs", seeds=5, r=0.9, eval_period=0)
    ql_log = run(base.replace(agent="ql", steps=300_000))
    ql_best = min(float(np.nanmin(r.rel_error)) for r in ql_log)
    ql_reached = ql_best < 0.2
    lb = time_to_thresholds(run(base.replace(agent="lbql", steps=40_000)))
    lb_ok = lb.n[0.2] is not None and lb.n[0.2] <= 2 * 8_346.4
    verdict(7, (not ql_reached) and lb_ok,
            f"QL best rel error {ql_best:.3f} in 3e5 steps; LBQL n20={fmt(lb.n[0.2])}")


# 8 ------------------------------------------------------------------------------------------------

def test_c08_example1_end_to_end(verdict):
    m = make_env("example1")
    q = qstar_for(m)
    mask = nonterminal_mask(m)
    cfg = RunConfig(env="example1", alpha=0.1, beta=0.05)
    hp = cfg.hyperparams()
    reached, lb300, ql300 = 0, [], []
    for seed in range(5):
        agent = make_agent("lbql-ideal", m, hp, seed)
        hit = None
        for i in range(1, 3001):
            agent.step()
            err = np.abs(agent.qp - q)[mask]
            if i == 300:
                lb300.append(err.mean())
            if hit is None and err.max() < 0.1:
                hit = i
        reached += hit is not None
        ql = make_agent("ql", m, hp, seed).run(300)
        ql300.append(np.abs(ql.q - q)[mask].mean())
    ok = reached >= 4 and np.mean(ql300) > np.mean(lb300)
    verdict(8, ok, f"{reached}/5 seeds within 0.1 by step 3000; mean |Q-Q*| at 300: "
                   f"LBQL {np.mean(lb300):.3f} vs QL {np.mean(ql300):.3f}")


# 9 ------------------------------------------------------------------------------------------------

@pytest.mark.slow
def test_c09_asymptotic_bound_validity(verdict):
    cfg = RunConfig(env="wg")
    m = cfg.model()
    q = qstar_for(m)
    agent = make_agent("lbql", m, cfg.hyperparams(), 0).run(50_000)
    sel = (agent.visits_sa >= 100) & nonterminal_mask(m)
    good = (agent.lower <= q + 0.5) & (agent.upper >= q - 0.5)
    frac = float(good[sel].mean())
    verdict(9, sel.any() and frac >= 0.99,
            f"{frac:.3f} of {int(sel.sum())} well-visited pairs bracket Q* within 0.5")


# 11 -----------------------------------------------------------------------------------------------

def test_c11_determinism(verdict, tmp_path):
    outs = []
    for sub in ("first", "second"):
        dest = tmp_path / sub
        code = cli_main(["run", "--env", "2-cs", "--agent", "lbql", "--steps", "3000",
                         "--seeds", "2", "--out", str(dest)], out=io.StringIO())
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in sorted(dest.glob("*.csv"))})
    same = outs[0] == outs[1] and len(outs[0]) == 4
    verdict(11, same, f"{len(outs[0])} CSV files byte-identical across two runs: {same}")
