"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 validation
suite failure. Numbers are written with 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalError, ParameterError

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3

FIGURE_T_GRID = (0.0, 5.0, 51)
# (z, u, v) curves drawn for each figure preset
FIGURE_CURVES = {
    "fig1": [(z, u, v) for z in (0.3, 0.7) for u in (0.0, 1.0) for v in (0.0, 1.0)],
    "fig2": [(z, 0.0, v) for z in (0.3, 0.7) for v in (0.0, 1.0)],
    "fig3": [(z, u, 0.0) for z in (0.3, 0.7) for u in (0.0, 1.0)],
}


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the invalid-input code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def _g(x: float) -> str:
    return f"{x:.12g}"


def parse_t_grid(text: str) -> np.ndarray:
    """``a:b:n`` -> ``n`` equally spaced times from ``a`` to ``b`` inclusive."""
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ParameterError("--t-grid", f"expected a:b:n with integer n, got {text!r}") from None
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < a:
        raise ParameterError("--t-grid", f"need 0 <= a <= b and n >= 1, got {text!r}")
    return np.linspace(a, b, n)


def _float_list(name):
    def parse(text):
        try:
            return [float(x) for x in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    return parse


def _load_model(args):
    from .model import Model, preset
    if args.params is not None:
        text = args.params
        if not text.lstrip().startswith("{"):
            try:
                with open(text, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ParameterError("--params", f"cannot read {args.params!r}: {exc.strerror}") from None
        model = Model.from_json(text)
    else:
        model = preset(args.preset)
    if getattr(args, "reset_policy", None) == "n-equals-one":
        model = replace(model, service=replace(model.service, reset_on_busy_period_start=False))
    model_flag = getattr(args, "model", None)
    if model_flag is not None and model_flag != model.kind.value:
        raise ParameterError("--model", f"{model_flag!r} conflicts with parameter set model {model.kind.value!r}")
    return model


def _add_params(p):
    g = p.add_argument_group("parameters (exactly one of --params / --preset)")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--params", metavar="JSON", help="parameter file, or an inline JSON object")
    src.add_argument("--preset", choices=["fig1", "fig2", "fig3", "mm-base"], help="built-in parameter set")
    g.add_argument("--reset-policy", choices=["busy-period", "n-equals-one"], default="busy-period",
                   help="when the service memory restarts (default: busy-period)")


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    from .simulator import mc_report_json, simulate_path, simulate_snapshots, trajectory_to_csv, McEstimate
    model = _load_model(args)
    if args.paths == 1:
        if not args.horizon > 0:
            raise ParameterError("--horizon", "must be positive")
        _emit(trajectory_to_csv(simulate_path(model, args.horizon, args.seed)), args.out)
        return EXIT_OK
    if args.paths < 1:
        raise ParameterError("--paths", "must be positive")
    ts = parse_t_grid(args.t_grid) if args.t_grid else np.array([args.horizon])
    batch = simulate_snapshots(model, ts, args.paths, args.seed)
    est = [McEstimate.from_samples(batch.column(args.statistic)[:, j]) for j in range(ts.size)]
    _emit(mc_report_json([float(t) for t in ts], est) + "\n", args.out)
    return EXIT_OK


def cmd_moments(args) -> int:
    from .moments import MomentConvention, moment_report
    model = _load_model(args)
    conv = MomentConvention(args.convention)
    rows = []
    for t in parse_t_grid(args.t_grid):
        rep = moment_report(model.arrival, float(t), conv)
        rows.append([_g(t), _g(rep.mean_lambda), _g(rep.var_lambda), _g(rep.mean_M), _g(rep.var_M)])
    _emit(_csv(["t", "mean_lambda", "var_lambda", "mean_M", "var_M"], rows), args.out)
    return EXIT_OK


def _curves(model, curves, ts, conv, sign, strict):
    from .transform import zeta_curve
    rows, failed = [], False
    for z, u, v in curves:
        try:
            vals = zeta_curve(model, z, u, v, ts, conv=conv, sign=sign)
        except NumericalError as exc:
            if strict:
                raise
            print(f"warning: curve z={z:g}, u={u:g}, v={v:g}: {exc}", file=sys.stderr)
            vals = np.empty(ts.size)
            for i, t in enumerate(ts):
                try:
                    vals[i] = zeta_curve(model, z, u, v, [t], conv=conv, sign=sign)[0]
                except NumericalError:
                    vals[i] = math.nan
            failed = True
        for t, val in zip(ts, vals):
            rows.append([_g(t), _g(z), _g(u), _g(v), _g(val)])
    return rows, failed


def cmd_transform(args) -> int:
    from .transform import SignVariant, ZetaConvention
    model = _load_model(args)
    ts = parse_t_grid(args.t_grid)
    curves = [(z, u, v) for z in args.z for u in args.u for v in args.v]
    rows, _ = _curves(model, curves, ts, ZetaConvention(args.convention), SignVariant(args.sign), strict=True)
    _emit(_csv(["t", "z", "u", "v", "zeta"], rows), args.out)
    return EXIT_OK


def cmd_figure(args) -> int:
    from .model import preset
    from .transform import DEFAULT_CONVENTION, DEFAULT_SIGN
    model = preset(args.figure)
    ts = np.linspace(*FIGURE_T_GRID[:2], FIGURE_T_GRID[2])
    rows, failed = _curves(model, FIGURE_CURVES[args.figure], ts, DEFAULT_CONVENTION, DEFAULT_SIGN, strict=False)
    _emit(_csv(["t", "z", "u", "v", "zeta"], rows), args.out)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_validate(args) -> int:
    from .validate import conventions_markdown, run_suite
    if args.paths < 2:
        raise ParameterError("--paths", "must be at least 2")
    result = run_suite(args.suite, seed=args.seed, n_paths=args.paths)
    report = result.to_json() + "\n"
    if args.out_dir is None:
        sys.stdout.write(report)
    else:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(report)
        with open(os.path.join(args.out_dir, "CONVENTIONS.md"), "w", encoding="utf-8") as fh:
            fh.write(conventions_markdown(result.verdicts) + "\n")
    return EXIT_OK if result.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    from .validate import DEFAULT_PATHS, DEFAULT_SEED, SUITES

    parser = _Parser(prog="hawkes-queue",
                     description="Hawkes / sdHawkes infinite-server queues: simulation, moments, "
                                 "transforms and Monte Carlo validation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one path (CSV) or a Monte Carlo mean (JSON)")
    _add_params(p)
    p.add_argument("--horizon", type=float, default=5.0, help="path length (default: 5)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default: {DEFAULT_SEED})")
    p.add_argument("--paths", type=int, default=1, help="number of paths; >1 writes an MC report (default: 1)")
    p.add_argument("--t-grid", metavar="A:B:N", help="report times for --paths > 1 (default: the horizon)")
    p.add_argument("--statistic", choices=["N", "M", "S", "lambda", "mu"], default="N",
                   help="quantity averaged for --paths > 1 (default: N)")
    p.add_argument("--out", metavar="FILE", help="output file (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", help="closed-form moments of the arrival process (CSV)")
    _add_params(p)
    p.add_argument("--t-grid", metavar="A:B:N", default="0:5:51", help="time grid (default: 0:5:51)")
    p.add_argument("--convention", choices=["raw-moments", "as-written"], default="raw-moments",
                   help="jump second-moment convention (default: raw-moments)")
    p.add_argument("--out", metavar="FILE", help="output file (default: stdout)")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("transform", help="joint transform zeta(t, z, u, v) on a time grid (CSV)")
    p.add_argument("--model", choices=["hsd", "msd", "hm", "mm"],
                   help="model kind; must agree with the parameter set")
    _add_params(p)
    p.add_argument("--t-grid", metavar="A:B:N", default="0:5:51", help="time grid (default: 0:5:51)")
    p.add_argument("--z", type=_float_list("--z"), default=[0.5], metavar="Z[,Z...]", help="default: 0.5")
    p.add_argument("--u", type=_float_list("--u"), default=[1.0], metavar="U[,U...]", help="default: 1")
    p.add_argument("--v", type=_float_list("--v"), default=[1.0], metavar="V[,V...]", help="default: 1")
    p.add_argument("--convention", choices=["at-t", "at-zero"], default="at-t",
                   help="lambda0 prefactor convention (default: at-t)")
    p.add_argument("--sign", choices=["minus-one", "plus-one"], default="minus-one",
                   help="Poisson-arrival exponent sign (default: minus-one)")
    p.add_argument("--out", metavar="FILE", help="output file (default: stdout)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("validate", help="Monte Carlo validation suites (JSON report)")
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all", help="suite to run (default: all)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"base seed (default: {DEFAULT_SEED})")
    p.add_argument("--paths", type=int, default=DEFAULT_PATHS, help=f"paths per comparison (default: {DEFAULT_PATHS})")
    p.add_argument("--out-dir", metavar="DIR",
                   help="write report.json and CONVENTIONS.md here (default: report to stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("figure", help="transform curves of a figure parameter set over t in [0, 5] (CSV)",
                       description="Curves: fig1 z in {0.3,0.7}, u in {0,1}, v in {0,1}; "
                                   "fig2 z in {0.3,0.7}, v in {0,1}; fig3 z in {0.3,0.7}, u in {0,1}. "
                                   "Times 0, 0.1, ..., 5. Points that cannot be evaluated are written "
                                   "as nan and the exit code is 2.")
    p.add_argument("figure", choices=sorted(FIGURE_CURVES))
    p.add_argument("--out", metavar="FILE", help="output file (default: stdout)")
    p.set_defaults(func=cmd_figure)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
