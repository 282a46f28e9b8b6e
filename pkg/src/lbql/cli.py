"""Command-line entry point: ``lbql {run,solve,bounds,sweep,report}``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import harness
from .bounds import PenaltyContext, mc_bound_tables
from .dp import greedy_value, q_value_iteration
from .envs import ENVIRONMENTS, make_env
from .errors import ConfigError, UnsupportedMetricError, UnsupportedModelError

EXIT_OK, EXIT_CONFIG, EXIT_METRIC = 0, 2, 3

# CLI flag -> RunConfig field, for flags that map one-to-one
_HYPER_FLAGS = {"r": float, "e": float, "alpha": float, "epsilon": float, "beta": float,
                "beta_exponent": float, "K": int, "kappa": int, "m": int, "delta": float,
                "gamma": float, "init": str, "horizon_cap": int, "eval_period": int,
                "eval_episodes": int, "window": int}


def parse_seeds(text):
    """``"5"`` means seeds 0..4; ``"3,7,11"`` lists seeds explicitly."""
    try:
        if "," in text:
            return [int(x) for x in text.split(",") if x.strip()]
        n = int(text)
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {text!r}") from exc
    if n < 1:
        raise ConfigError("--seeds needs at least one seed")
    return list(range(n))


def parse_grid(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc


def _common(p, agent=True):
    p.add_argument("--env", choices=sorted(ENVIRONMENTS))
    if agent:
        p.add_argument("--agent")
    p.add_argument("--steps", type=int)
    p.add_argument("--seeds")
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--out")
    p.add_argument("--qstar", help="Q* CSV written by 'solve'")
    for name, typ in _HYPER_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    p.add_argument("--timing", action="store_true", default=None,
                   help="record per-step wall-clock times (makes CSVs run-dependent)")
    p.add_argument("--no-rel-error", dest="rel_error", action="store_false", default=None)
    p.add_argument("--project-all", action="store_true", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="lbql", description="Lookahead-bounded Q-learning lab")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="train agents and write per-step CSVs"))

    p = sub.add_parser("solve", help="exact value iteration; writes Q*/V* CSV")
    p.add_argument("--env", choices=sorted(ENVIRONMENTS), required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default=".")

    p = sub.add_parser("bounds", help="Monte Carlo information-relaxation bounds")
    p.add_argument("--env", choices=sorted(ENVIRONMENTS), required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--phi", choices=("zero", "qstar", "file"), default="zero")
    p.add_argument("--phi-file")
    p.add_argument("--mode", choices=("exact", "fresh-batch", "fixed-batch"), default="exact")
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="time-to-threshold grid over (e, r)")
    _common(p, agent=False)
    p.add_argument("--agents", default="lbql,ql")
    p.add_argument("--e-grid", default=",".join(f"{x:g}" for x in harness.SWEEP_E))
    p.add_argument("--r-grid", default=",".join(f"{x:g}" for x in harness.SWEEP_R))

    p = sub.add_parser("report", help="time-to-threshold table from run CSVs")
    p.add_argument("logs", nargs="+", help="per-seed CSV files or directories")
    p.add_argument("--out")
    return parser


def config_from_args(args):
    data = {}
    if args.config:
        data.update(harness.RunConfig.from_json(args.config).to_dict())
    for key in ("env", "agent", "steps", "out", "qstar", "timing", "rel_error", "project_all",
                *_HYPER_FLAGS):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.seeds is not None:
        data["seeds"] = parse_seeds(args.seeds)
    return harness.RunConfig.from_dict(data)


def cmd_run(args, out):
    config = config_from_args(args)
    log = harness.run(config)
    for r in log:
        final = r.rel_error[-1] if r.steps else float("nan")
        print(f"{r.run_id}: steps={r.steps} final_rel_error={final:.6g}", file=out)
    if config.out:
        print(f"wrote {config.out}", file=out)


def cmd_solve(args, out):
    model = make_env(args.env, args.gamma)
    q = q_value_iteration(model, tol=args.tol)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    path = Path(args.out) / f"qstar-{args.env}-tol{args.tol:g}.csv"
    harness.write_qstar(path, model, q)
    v = greedy_value(q, model)
    print(f"{args.env}: |V*|_2={np.linalg.norm(v):.6g} -> {path}", file=out)


def cmd_bounds(args, out):
    model = make_env(args.env, args.gamma)
    if args.phi == "zero":
        phi = np.zeros((model.n_states, model.n_actions))
    elif args.phi == "qstar":
        phi = harness.qstar_for(model)
    else:
        if not args.phi_file:
            raise ConfigError("--phi file needs --phi-file")
        phi = harness.load_qstar(args.phi_file, model)
    rng = np.random.default_rng(args.seed)
    if args.mode == "exact":
        ctx = PenaltyContext.exact(model, phi)
    elif args.mode == "fixed-batch":
        ctx = PenaltyContext.fixed_batch(model, phi, model.sample_noise(rng, args.K))
    else:
        ctx = PenaltyContext.fresh_batch(model, phi, args.K, rng)
    mu, ml, su, sl = mc_bound_tables(model, ctx, args.paths, rng)
    rows = [(s, a, repr(float(mu[s, a])), repr(float(su[s, a])),
             repr(float(ml[s, a])), repr(float(sl[s, a])))
            for s in range(model.n_states) for a in range(model.n_actions) if model.feasible[s, a]]
    sink = open(args.out, "w", newline="") if args.out else out
    try:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(("state", "action", "upper", "upper_se", "lower", "lower_se"))
        w.writerows(rows)
    finally:
        if args.out:
            sink.close()


def cmd_sweep(args, out):
    base = config_from_args(args)
    agents = tuple(a for a in args.agents.split(",") if a)
    dest = Path(base.out) / "sweep.csv" if base.out else None
    text = harness.sweep(base.replace(out=None), agents=agents, e_grid=parse_grid(args.e_grid),
                         r_grid=parse_grid(args.r_grid), out=dest)
    out.write(text)


def cmd_report(args, out):
    files = []
    for item in args.logs:
        p = Path(item)
        if p.is_dir():
            files += sorted(f for f in p.glob("*.csv") if f.name not in ("aggregate.csv", "perf.csv"))
        elif p.is_file():
            files.append(p)
        else:
            raise ConfigError(f"no such log {item!r}")
    if not files:
        raise ConfigError("no run logs found")
    runs = [harness.read_run_csv(f) for f in files]
    rep = harness.time_to_thresholds(runs)
    text = ",".join(harness.threshold_header(rep.thresholds)) + "\n" + ",".join(rep.row()) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    out.write(text)


COMMANDS = {"run": cmd_run, "solve": cmd_solve, "bounds": cmd_bounds,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnsupportedMetricError, UnsupportedModelError) as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_METRIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
