"""Command-line entry point: experiments, designs, privacy audits and bounds.

Exit codes: 0 success, 1 runtime error (bad input data, failed run), 2 usage.
The worker count for experiments comes from ``--workers`` or ``ZCDP_WORKERS``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audit, bounds
from .core import ConfigError, DomainError
from .design import DesignConvergenceError, DesignError, frank_wolfe_goptimal
from .harness import PRESETS, config_from_dict, load_config, preset, run_experiment, write_outputs
from .harness.runner import WORKERS_ENV

__all__ = ["build_parser", "cli_dispatch", "main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zcdp-bandits", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    e = sub.add_parser("experiment", help="run an experiment config and write CSV/manifest outputs")
    e.add_argument("config", help="JSON experiment config")
    e.add_argument("--out", help="output directory (default: the config's output_dir)")
    e.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or 1)")

    r = sub.add_parser("reproduce", help="run a figure preset")
    r.add_argument("preset", choices=sorted(PRESETS))
    r.add_argument("--full-scale", action="store_true", help="T = 1e7 and 100 runs instead of desk scale")
    r.add_argument("--runs", type=int, help="override the run count")
    r.add_argument("--horizon", type=int, help="override the horizon")
    r.add_argument("--out", help="output directory (default: results/<preset>)")
    r.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or 1)")

    d = sub.add_parser("design", help="G-optimal design of an action set")
    d.add_argument("actions", help="JSON list of action vectors, or a whitespace/comma separated table")
    d.add_argument("--tol", type=float, default=1e-2)
    d.add_argument("--max-iter", type=int, default=10_000)

    a = sub.add_parser("audit", help="exact privacy audit of a finite policy (JSON report)")
    a.add_argument("policy", help="policy JSON file, or the name of a shipped fixture")
    a.add_argument("--mode", choices=audit.MODES, default="table")
    a.add_argument("--eps", type=float)
    a.add_argument("--delta", type=float)
    a.add_argument("--rho", type=float)

    b = sub.add_parser("bounds", help="print regret lower/upper bound values")
    b.add_argument("setting", choices=["finite", "linear"])
    b.add_argument("--K", type=int, help="number of arms")
    b.add_argument("--d", type=int, help="dimension (linear)")
    b.add_argument("--T", type=float, required=True, help="horizon")
    b.add_argument("--rho", type=float, required=True, help="zCDP budget")
    b.add_argument("--gaps", help="comma separated gaps for the AdaC-UCB upper bounds (finite)")
    b.add_argument("--beta", type=float, default=4.0, help="AdaC-UCB exploration parameter (> 3)")
    b.add_argument("--delta", type=float, default=0.001, help="confidence level for order shapes (linear)")
    return p


def _print_run(traces, summary, out_dir) -> None:
    print(f"wrote {len(traces)} traces to {out_dir}")
    if len(summary) == 0:
        return
    t_final = int(summary.t.max())
    for algo in dict.fromkeys(summary.algo):
        for rho in dict.fromkeys(summary.select(algo).rho.tolist()):
            row = summary.row(algo, rho, t_final)
            print(f"{algo} rho={rho:g} T={t_final}: mean_priv={row['mean_priv']:.6g} "
                  f"mean_nonpriv={row['mean_nonpriv']:.6g} gap={row['gap']:.6g} pop={row['pop']:.6g}")


def _cmd_experiment(args) -> int:
    config = load_config(args.config)
    out = args.out or config.output_dir
    traces, summary = run_experiment(config, workers=args.workers)
    write_outputs(traces, summary, out, config)
    _print_run(traces, summary, out)
    return 0


def _cmd_reproduce(args) -> int:
    config = preset(args.preset, full_scale=args.full_scale)
    if args.runs is not None or args.horizon is not None:
        data = config.to_dict()
        if args.runs is not None:
            data["runs"] = args.runs
        if args.horizon is not None:
            data["horizon"] = args.horizon
        config = config_from_dict(data)
    out = args.out or config.output_dir
    traces, summary = run_experiment(config, workers=args.workers)
    write_outputs(traces, summary, out, config)
    _print_run(traces, summary, out)
    return 0


def _load_actions(path: str) -> np.ndarray:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["actions"]
        return np.asarray(data, dtype=float)
    except (json.JSONDecodeError, KeyError):
        return np.loadtxt(path, delimiter="," if "," in text else None, ndmin=2)


def _cmd_design(args) -> int:
    X = _load_actions(args.actions)
    try:
        des = frank_wolfe_goptimal(X, tol=args.tol, max_iter=args.max_iter)
        converged = True
    except DesignConvergenceError as exc:
        des, converged = exc.best, False
    report = {
        "g": des.g,
        "f": des.f,
        "dim": int(X.shape[1]),
        "iterations": des.iterations,
        "converged": converged,
        "support": des.support.tolist(),
        "weights": des.weights[des.support].tolist(),
    }
    print(json.dumps(report, indent=2))
    return 0 if converged else 1


def _load_policy(ref: str) -> audit.FinitePolicy:
    path = Path(ref)
    if path.is_file():
        return audit.FinitePolicy.from_json(path)
    try:
        return audit.load_fixture(path.stem)
    except FileNotFoundError:
        raise audit.AuditError(f"{ref}: no such policy file or shipped fixture") from None


def _cmd_audit(args, parser) -> int:
    approx = args.eps is not None or args.delta is not None
    if approx == (args.rho is not None):
        parser.error("audit needs either --eps and --delta, or --rho")
    if approx and (args.eps is None or args.delta is None):
        parser.error("--eps and --delta must be given together")
    policy = _load_policy(args.policy)
    if approx:
        report = audit.audit_approx_dp(policy, args.eps, args.delta, mode=args.mode)
    else:
        report = audit.audit_zcdp(policy, args.rho, mode=args.mode)
    print(report.to_json())
    return 0


def _cmd_bounds(args, parser) -> int:
    out = {"setting": args.setting, "T": args.T, "rho": args.rho}
    if args.setting == "finite":
        if args.K is None:
            parser.error("bounds finite needs --K")
        out["K"] = args.K
        out["lower_bound"] = bounds.minimax_lower_bound("finite", args.T, args.rho, K=args.K)
        if args.gaps is not None:
            gaps = [float(g) for g in args.gaps.split(",")]
            out["beta"] = args.beta
            out["upper_bound_dependent"] = bounds.theoretical_ub_adacucb(gaps, args.T, args.beta, args.rho)
            out["upper_bound_minimax"] = bounds.theoretical_ub_adacucb(gaps, args.T, args.beta, args.rho,
                                                                       variant="minimax")
    else:
        if args.d is None:
            parser.error("bounds linear needs --d")
        out["d"] = args.d
        out["lower_bound"] = bounds.minimax_lower_bound("linear", args.T, args.rho, d=args.d)
        out["private_regime_threshold"] = bounds.privacy_regime_threshold(args.T)
        out["oful_order_unit_constants"] = bounds.oful_upper_order(args.d, args.T, args.rho)
        if args.K is not None:
            out["K"] = args.K
            out["gope_order_unit_constants"] = bounds.gope_upper_order(args.d, args.K, args.T, args.rho,
                                                                       args.delta)
    for key, val in out.items():
        if isinstance(val, float) and key not in ("T", "rho", "beta"):
            print(f"{key}: {val:.6g}")
        else:
            print(f"{key}: {val}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "experiment":
            return _cmd_experiment(args)
        if args.command == "reproduce":
            return _cmd_reproduce(args)
        if args.command == "design":
            return _cmd_design(args)
        if args.command == "audit":
            return _cmd_audit(args, parser)
        return _cmd_bounds(args, parser)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except (ConfigError, DomainError, DesignError, audit.AuditError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


cli_dispatch = main

if __name__ == "__main__":
    sys.exit(main())
