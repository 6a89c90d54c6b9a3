"""Command-line entry point: ``lbdp simulate|estimate|bench|vaf``.

Exit status is 0 on success, 1 for invalid input or usage and 2 when a
computation fails. Library errors that are also ``ValueError`` (bad
parameters, unusable schedules, out-of-range frequencies) count as invalid
input; arithmetic failures and non-converged fits give 2. Data goes to standard output or ``--out``; errors go to
standard error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import emit_report, load_config, run_grid
from .errors import LBDPError
from .estimate import DEFAULT_CONFIG, approx_mle, gaussian_mle, gw_estimate
from .inhomogeneous import exp_decay_spec, generalized_estimate
from .io import read_series_csv, to_text, write_series_csv, write_trajectory_csv
from .saddlepoint import saddlepoint_mle
from .simulate import gillespie, make_rng, observe, sample_schedule, tau_leap
from .types import RateParams
from .vaf import DEFAULT_WILDTYPE, SUMMARY_HEADER, fit_cohort, read_vaf_csv, summarize, summary_rows

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

DEFAULT_SEED = 0

RESULT_HEADER = (
    "method", "alpha_hat", "sigma2_hat", "lambda_hat", "mu_hat",
    "converged", "iterations", "runtime_seconds",
)

FITTERS = {
    "gw": gw_estimate,
    "approx": approx_mle,
    "gaussian": gaussian_mle,
    "saddlepoint": saddlepoint_mle,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_simulate(args) -> int:
    p = RateParams(args.lam, args.mu)
    rng = make_rng(args.seed)
    header = [f"seed={args.seed}"]
    if args.n_series is None:
        if args.simulator == "tauleap":
            traj = tau_leap(p, args.x0, args.t_max, args.tau_step, rng)
        else:
            traj = gillespie(p, args.x0, args.t_max, rng)
        if args.out is None:
            write_trajectory_csv(sys.stdout, traj, header)
        else:
            write_trajectory_csv(args.out, traj, header)
        return EXIT_OK
    # observed series on one shared gamma schedule, truncated at t_max
    times = sample_schedule(args.n_timepoints, args.gamma_shape, args.gamma_rate, rng)
    times = times[times <= args.t_max]
    series = []
    for k in range(args.n_series):
        if args.simulator == "tauleap":
            traj = tau_leap(p, args.x0, times[-1], args.tau_step, rng)
        else:
            traj = gillespie(p, args.x0, times[-1], rng)
        series.append(observe(traj, times, f"s{k}"))
    target = sys.stdout if args.out is None else args.out
    write_series_csv(target, series, header)
    return EXIT_OK


def _result_rows(res, with_theta: bool):
    row = [
        res.method, res.alpha_hat, res.sigma2_hat, res.lambda_hat, res.mu_hat,
        res.converged, res.iterations, res.runtime_seconds,
    ]
    if with_theta:
        row.append(";".join(repr(float(v)) for v in res.theta) if res.theta is not None else "")
    return [row]


def _cmd_estimate(args) -> int:
    series = read_series_csv(args.input)
    if args.method == "generalized":
        if args.model != "exp-decay":
            raise UsageError(f"unknown model {args.model!r}")
        spec = exp_decay_spec(args.death_rate)
        if args.theta_init is not None:
            theta0 = [float(v) for v in args.theta_init.split(",")]
        else:
            start = approx_mle(series)
            alpha0 = start.alpha_hat if start.converged else 0.0
            theta0 = [max(alpha0 + args.death_rate, 1e-3), 0.0]
        res = generalized_estimate(spec, series, theta0, DEFAULT_CONFIG)
    else:
        res = FITTERS[args.method](series, DEFAULT_CONFIG)
    with_theta = args.method == "generalized"
    header = RESULT_HEADER + (("theta",) if with_theta else ())
    rows = _result_rows(res, with_theta)
    if args.omit_timing:
        for row in rows:
            row[7] = ""
    _emit(to_text(header, rows), args.out)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_FAILURE


def _cmd_bench(args) -> int:
    configs = load_config(args.config)
    if args.seed is not None:
        configs = [replace(c, seed=args.seed) for c in configs]
    if args.workers is not None:
        configs = [replace(c, workers=args.workers) for c in configs]
    report = run_grid(configs)
    seeds = sorted({c.seed for c in configs})
    emit_report(report, args.out, comments=[f"seed={','.join(str(s) for s in seeds)}"])
    return EXIT_OK


def _cmd_vaf(args) -> int:
    records = read_vaf_csv(args.input)
    fits = fit_cohort(records, args.method, args.exact_inverse, args.wildtype_pop)
    for f in fits:
        if f.note:
            print(f"warning: {f.subject_id}/{f.mutation}: {f.note}", file=sys.stderr)
    summaries = summarize(fits, args.method)
    _emit(to_text(SUMMARY_HEADER, summary_rows(summaries)), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lbdp", description="Linear birth-death process simulation and growth-rate estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--version", action="version", version=f"lbdp {__version__}")
        return sp

    sim = add("simulate", "Simulate a trajectory, or observed series with --n-series.")
    sim.add_argument("--lambda", dest="lam", type=float, required=True, help="birth rate")
    sim.add_argument("--mu", type=float, required=True, help="death rate")
    sim.add_argument("--x0", type=int, default=100)
    sim.add_argument("--t-max", type=float, default=10.0)
    sim.add_argument("--simulator", choices=("gillespie", "tauleap"), default="gillespie")
    sim.add_argument("--tau-step", type=float, default=0.01)
    sim.add_argument("--n-series", type=int, default=None, help="write this many observed series instead of a trajectory")
    sim.add_argument("--n-timepoints", type=int, default=10)
    sim.add_argument("--gamma-shape", type=float, default=1.0)
    sim.add_argument("--gamma-rate", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=_cmd_simulate)

    est = add("estimate", "Fit the growth rate of observed series.")
    est.add_argument("--input", required=True, help="CSV with series_id,time,count")
    est.add_argument("--method", choices=tuple(FITTERS) + ("generalized",), default="approx")
    est.add_argument("--model", default="exp-decay", help="rate family for --method generalized")
    est.add_argument("--death-rate", type=float, default=0.0)
    est.add_argument("--theta-init", default=None, help="comma-separated start for --method generalized")
    est.add_argument("--omit-timing", action="store_true", help="leave runtime_seconds empty so output is reproducible")
    est.add_argument("--seed", type=int, default=DEFAULT_SEED, help="accepted for uniformity; estimation is deterministic")
    est.add_argument("--out", default=None)
    est.set_defaults(func=_cmd_estimate)

    ben = add("bench", "Run the Monte Carlo estimator comparison.")
    ben.add_argument("--config", required=True)
    ben.add_argument("--out", required=True, help="directory for report.csv and report.txt")
    ben.add_argument("--seed", type=int, default=None, help="override the seed in the config")
    ben.add_argument("--workers", type=int, default=None)
    ben.set_defaults(func=_cmd_bench)

    vaf = add("vaf", "Fit growth rates to allele-frequency series and summarize per mutation.")
    vaf.add_argument("--input", required=True, help="CSV with subject_id,mutation,time,vaf")
    vaf.add_argument("--method", choices=("approx", "gaussian", "saddlepoint", "gw"), default="approx")
    vaf.add_argument("--exact-inverse", action="store_true")
    vaf.add_argument("--wildtype-pop", type=float, default=DEFAULT_WILDTYPE)
    vaf.add_argument("--seed", type=int, default=DEFAULT_SEED, help="accepted for uniformity; fitting is deterministic")
    vaf.add_argument("--out", default=None)
    vaf.set_defaults(func=_cmd_vaf)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LBDPError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
