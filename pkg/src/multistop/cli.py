"""Command-line entry point: ``multistop <subcommand> ...``.

Exit codes: 0 success, 1 validation or property failure, 2 I/O or usage error.
Every subcommand that writes files writes them into ``--out`` together with a
``metadata.json`` holding the full configuration and seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .estimation import DegenerateRangeError, IngestError, estimate_model, ingest
from .grid import SimplexGrid
from .linear import check_feasible, load_policy, save_policy
from .model import DimensionError, load_model, save_model, validate_model
from .simulate import (DEFAULT_HORIZON, SOFTMAX_GAINS, InvalidCostError, compare_policies, estimate_J,
                       format_comparison, optimize_num_stops, quadratic_cost, rollout,
                       baseline_first_l, baseline_random, train_softmax_baseline)
from .spsa import SpsaConfig, train
from .vi import export_table, solve_value_iteration, verify_structure

POLICY_NAMES = ("vi", "linear", "rl", "random", "first-l")


class UsageError(Exception):
    pass


def _read_model(path):
    try:
        return load_model(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc


class Outputs:
    """Output directory writer: atomic file writes, refuses to overwrite without ``force``."""

    def __init__(self, directory, force: bool = False):
        self.dir = Path(directory)
        self.force = force
        self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        target = self.dir / name
        if target.exists() and not self.force:
            raise UsageError(f"{target} exists; pass --force to overwrite")
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{name}.")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
        return target

    def metadata(self, args, **extra):
        cfg = {k: v for k, v in vars(args).items() if k not in ("func", "force")}
        meta = {"tool": "multistop", "version": __version__, "config": cfg}
        meta.update(extra)
        self.write("metadata.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _spsa_config(args, gains=None, **kw) -> SpsaConfig:
    gains = [float(g) for g in (gains or args.gains).split(",")]
    if len(gains) != 5:
        raise UsageError("--gains needs five comma-separated values: epsilon,varsigma,kappa,nu,psi")
    try:
        return SpsaConfig.from_gains(gains, num_iterations=args.iterations, rollouts_per_eval=args.spsa_rollouts,
                                     horizon=args.horizon, seed=args.seed, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    model = _read_model(args.model)
    report = validate_model(model)
    print(report)
    return 0 if report.ok else 1


def cmd_solve(args) -> int:
    model = _read_model(args.model)
    out = Outputs(args.out, args.force)
    grid = SimplexGrid(model.num_states, args.grid)
    table = solve_value_iteration(model, grid, max_iters=args.max_iters, tol=args.tol)
    structure = verify_structure(table)
    tmp = out.dir / ".value_table.tmp"
    export_table(table, tmp)
    out.write("value_table.csv", tmp.read_text())
    tmp.unlink()
    X = model.num_states
    rows = [",".join([f"pi{i + 1}" for i in range(X)] + [f"action_l{l}" for l in range(1, model.num_stops + 1)])]
    for g, pt in enumerate(grid.points):
        rows.append(",".join([f"{c:.10g}" for c in pt] + [str(a) for a in table.actions[g]]))
    out.write("mine_sets.csv", "\n".join(rows) + "\n")
    summary = [
        f"grid points: {len(grid)}",
        f"iterations: {table.iterations}  converged: {table.converged}  residual: {table.residual:.3e}",
        f"value at initial belief (level 1): {table.value(model.initial_belief, 1):.6f}",
        str(structure),
    ]
    out.write("structure.txt", "\n".join(summary) + "\n")
    out.metadata(args)
    print("\n".join(summary))
    return 0 if table.converged else 1


def cmd_train(args) -> int:
    model = _read_model(args.model)
    out = Outputs(args.out, args.force)
    cfg = _spsa_config(args)
    policy, trace = train(model, cfg)
    tmp = out.dir / ".policy.tmp"
    save_policy(policy, tmp)
    out.write("policy.txt", tmp.read_text())
    tmp.unlink()
    out.write("trace.csv", trace.to_text())
    J, se = estimate_J(model, policy, args.rollouts, args.horizon, args.seed)
    out.metadata(args, spsa=cfg.__dict__)
    print(f"trained policy theta:\n{policy.theta}\nJ = {J:.6f} +/- {se:.6f}")
    return 0 if check_feasible(policy).ok else 1


def _build_policies(args, model):
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in names if p not in POLICY_NAMES]
    if bad:
        raise UsageError(f"unknown policies {bad}; choose from {', '.join(POLICY_NAMES)}")
    policies = []
    for name in names:
        if name == "vi":
            table = solve_value_iteration(model, SimplexGrid(model.num_states, args.grid))
            policies.append(table.as_policy())
        elif name == "linear":
            if args.policy_file:
                pol = load_policy(args.policy_file)
                pol = type(pol)(pol.theta, name="linear threshold (file)")
            else:
                pol, _ = train(model, _spsa_config(args))
            policies.append(pol)
        elif name == "rl":
            pol, _ = train_softmax_baseline(model, _spsa_config(args, args.rl_gains))
            policies.append(pol)
        elif name == "random":
            policies.append(baseline_random(0.5))
        else:
            policies.append(baseline_first_l(model.num_stops))
    return policies


def cmd_compare(args) -> int:
    model = _read_model(args.model)
    out = Outputs(args.out, args.force)
    rows = compare_policies(model, _build_policies(args, model), args.rollouts, args.horizon, args.seed)
    text = format_comparison(rows)
    out.write("comparison.txt", text)
    out.metadata(args)
    print(text, end="")
    return 0


def cmd_simulate(args) -> int:
    model = _read_model(args.model)
    out = Outputs(args.out, args.force)
    args.policies = args.policy
    (policy,) = _build_policies(args, model)
    J, se = estimate_J(model, policy, args.rollouts, args.horizon, args.seed)
    rec = rollout(model, policy, args.horizon, np.random.default_rng(args.seed))
    lines = ["t,state,action," + ",".join(f"pi{i + 1}" for i in range(model.num_states))]
    for t, (s, a, b) in enumerate(zip(rec.states, rec.actions, rec.beliefs)):
        lines.append(f"{t},{s},{a}," + ",".join(f"{v:.10g}" for v in b))
    out.write("trajectory.csv", "\n".join(lines) + "\n")
    summary = f"policy: {policy.name}\nmean J: {J:.6f}\nstd err: {se:.6f}\nstop times (sample path): {rec.stop_times.tolist()}\n"
    out.write("summary.txt", summary)
    out.metadata(args)
    print(summary, end="")
    return 0


def cmd_estimate(args) -> int:
    try:
        data = ingest(args.csv)
    except OSError as exc:
        raise UsageError(f"cannot read {args.csv}: {exc}") from exc
    except IngestError as exc:
        raise UsageError(str(exc)) from exc
    out = Outputs(args.out, args.force)
    try:
        model, report = estimate_model(data, args.states, args.obs, args.discount, args.stops)
    except DegenerateRangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    tmp = out.dir / ".model.tmp"
    save_model(model, tmp)
    out.write("model.json", tmp.read_text())
    tmp.unlink()
    out.write("estimation_report.json", json.dumps(report.to_dict(), indent=2) + "\n")
    out.metadata(args)
    print(f"records: {report.num_records}  rejected: {len(report.rejected)}")
    print(f"transition:\n{model.transition}")
    print(f"observation TP2: {report.observation_is_tp2}  projection distance: {report.tp2_distance:.4g}")
    return 0 if report.observation_is_tp2 else 1


def cmd_optimize_stops(args) -> int:
    model = _read_model(args.model)
    out = Outputs(args.out, args.force)
    try:
        res = optimize_num_stops(lambda L: model.replace(num_stops=L), quadratic_cost(args.cost),
                                 args.lmax, resolution=args.grid)
    except InvalidCostError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["L,value,cost,net"]
    lines += [f"{L},{res.value[L]:.10g},{res.cost[L]:.10g},{res.net[L]:.10g}" for L in sorted(res.net)]
    lines.append(f"# best L = {res.best}; value concave in L: {res.value_concave}")
    text = "\n".join(lines) + "\n"
    out.write("stops.csv", text)
    out.metadata(args)
    print(text, end="")
    return 0


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multistop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_out(sp):
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    def with_sim(sp, rollouts=100_000):
        sp.add_argument("--rollouts", type=int, default=rollouts)
        sp.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
        sp.add_argument("--seed", type=int, default=0)

    def with_spsa(sp):
        sp.add_argument("--gains", default="0.7,0.1,0.6,0.6,0.1", help="epsilon,varsigma,kappa,nu,psi")
        sp.add_argument("--iterations", type=int, default=200)
        sp.add_argument("--spsa-rollouts", type=int, default=500)
        sp.add_argument("--rl-gains", default=",".join(map(str, SOFTMAX_GAINS)),
                        help="SPSA gains for the softmax baseline")

    sp = sub.add_parser("validate", help="check a model file against the structural assumptions")
    sp.add_argument("model")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="grid value iteration and structure report")
    sp.add_argument("model")
    sp.add_argument("--grid", type=int, default=30)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iters", type=int, default=2000)
    with_out(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("train", help="SPSA training of a linear threshold policy")
    sp.add_argument("model")
    with_spsa(sp)
    with_sim(sp, rollouts=10_000)
    with_out(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("compare", help="score several policies on common sample paths")
    sp.add_argument("model")
    sp.add_argument("--policies", default=",".join(POLICY_NAMES))
    sp.add_argument("--policy-file", help="trained linear policy to use instead of training one")
    sp.add_argument("--grid", type=int, default=30)
    with_spsa(sp)
    with_sim(sp)
    with_out(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("simulate", help="Monte Carlo evaluation of one policy plus a sample path")
    sp.add_argument("model")
    sp.add_argument("--policy", default="first-l", choices=POLICY_NAMES)
    sp.add_argument("--policy-file")
    sp.add_argument("--grid", type=int, default=30)
    with_spsa(sp)
    with_sim(sp, rollouts=10_000)
    with_out(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate a model from a hash-rate/difficulty CSV")
    sp.add_argument("csv")
    sp.add_argument("--states", type=int, default=3)
    sp.add_argument("--obs", type=int, default=5)
    sp.add_argument("--discount", type=float, default=0.9)
    sp.add_argument("--stops", type=int, default=3)
    with_out(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("optimize-stops", help="choose the number of stops under cost c * L^2")
    sp.add_argument("model")
    sp.add_argument("--cost", type=float, default=0.005)
    sp.add_argument("--lmax", type=int, default=6)
    sp.add_argument("--grid", type=int, default=30)
    with_out(sp)
    sp.set_defaults(func=cmd_optimize_stops)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
