"""Command-line front end: ``afem {run,rates,list-problems,export-mesh}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .driver import AfemConfig, AfemFailure, fit_loglog, read_trace_csv, replay_mesh, run
from .mesh import MeshError, format_mesh
from .problems import describe_problems, problem_ids
from .solver import EigenConfig, NewtonConfig, SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# defaults of the run subcommand; a --config file may override them and
# explicit flags override the file
RUN_DEFAULTS = {
    "problem": None, "degree": 1, "theta": 0.5, "max_dofs": 100_000, "no_max_dofs": False,
    "tol": None, "gamma": None, "bisections": 1, "out": None, "dump_indicators": False,
    "uniform": False, "timing": False, "solver": None, "solver_tol": 1e-10,
    "newton_tol": 1e-10, "eigen_tol": 1e-10, "window": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afem", description="Adaptive finite elements with residual estimators.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="run the adaptive (or uniform) loop")
    p.add_argument("--config", help="JSON file with run options (flags take precedence)")
    p.add_argument("--problem", help="catalog id, see list-problems")
    p.add_argument("--degree", type=int, choices=(1, 2))
    p.add_argument("--theta", type=float, help="marking parameter in (0, 1)")
    p.add_argument("--max-dofs", type=int, help="stop before exceeding this many DOFs")
    p.add_argument("--no-max-dofs", action="store_true", help="disable the DOF limit (needs --tol)")
    p.add_argument("--tol", type=float, help="stop once eta <= tol")
    p.add_argument("--gamma", type=float, help="gamma of the contraction report")
    p.add_argument("--bisections", type=int, help="bisections per marked element")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dump-indicators", action="store_true", help="write indicators_k.csv")
    p.add_argument("--uniform", action="store_true", help="refine every element")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.add_argument("--solver", choices=("cg", "bicgstab"), help="force the Krylov method")
    p.add_argument("--solver-tol", type=float)
    p.add_argument("--newton-tol", type=float)
    p.add_argument("--eigen-tol", type=float)
    p.add_argument("--window", type=int, help="trailing iterations used for slopes")

    p = sub.add_parser("rates", help="fit a log-log slope to a trace CSV")
    p.add_argument("trace")
    p.add_argument("--window", type=int, help="number of trailing rows (default: last half)")
    p.add_argument("--x", default="dofs", choices=("dofs", "elements"))
    p.add_argument("--y", default="eta", choices=("eta", "energy_error", "osc", "lambda_error"))

    sub.add_parser("list-problems", help="list catalog problems")

    p = sub.add_parser("export-mesh", help="regenerate the mesh of an iteration")
    p.add_argument("trace_dir")
    p.add_argument("--iteration", type=int, required=True)
    p.add_argument("--output", help="file to write (default: standard output)")
    return parser


def _run_options(args) -> dict:
    opts = dict(RUN_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(data) - set(RUN_DEFAULTS)
        if unknown:
            raise UsageError("unknown config keys: " + ", ".join(sorted(unknown)))
        opts.update(data)
    for key in RUN_DEFAULTS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            opts[key] = v
    return opts


def _cmd_run(args) -> int:
    o = _run_options(args)
    if o["problem"] is None:
        raise UsageError("--problem is required; choose from " + ", ".join(problem_ids()))
    if o["problem"] not in problem_ids():
        raise UsageError(f"unknown problem {o['problem']!r}; choose from " + ", ".join(problem_ids()))
    if o["out"] is None:
        raise UsageError("--out is required")
    try:
        cfg = AfemConfig(
            problem=o["problem"], degree=int(o["degree"]), theta=float(o["theta"]),
            bisections=int(o["bisections"]),
            max_dofs=None if o["no_max_dofs"] else int(o["max_dofs"]),
            tol=o["tol"], gamma=o["gamma"], uniform=bool(o["uniform"]),
            solver=SolverConfig(method=o["solver"], tol=float(o["solver_tol"])),
            newton=NewtonConfig(tol=float(o["newton_tol"])),
            eigen=EigenConfig(tol=float(o["eigen_tol"])),
            out=o["out"], dump_indicators=bool(o["dump_indicators"]),
            record_timing=bool(o["timing"]), window=o["window"])
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    try:
        trace = run(cfg)
    except AfemFailure as exc:
        print(f"numerical failure after {len(exc.trace.records)} iterations: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (MeshError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    last = trace.records[-1]
    print(f"iterations={len(trace.records)} dofs={last.dofs} eta={last.eta!r}")
    return EXIT_OK


def _cmd_rates(args) -> int:
    try:
        cols = read_trace_csv(args.trace)
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc}") from None
    for name in (args.x, args.y):
        if name not in cols:
            raise UsageError(f"column {name!r} missing from {args.trace}")
    xs, ys = cols[args.x], cols[args.y]
    start = len(xs) // 2 if args.window is None else max(0, len(xs) - args.window)
    xs, ys = xs[start:], ys[start:]
    if any(v is None for v in xs + ys):
        raise UsageError(f"column {args.y!r} has empty entries")
    try:
        slope = fit_loglog(xs, ys)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"slope={slope:.10f} n={len(xs)}")
    return EXIT_OK


def _cmd_list(args) -> int:
    for pid, desc in describe_problems():
        print(f"{pid}\t{desc}")
    return EXIT_OK


def _cmd_export(args) -> int:
    try:
        mesh = replay_mesh(args.trace_dir, args.iteration)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    text = format_mesh(mesh)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "rates": _cmd_rates, "list-problems": _cmd_list,
            "export-mesh": _cmd_export}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
