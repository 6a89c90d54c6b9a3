"""Monte Carlo comparison of the growth-rate estimators.

Each replicate draws one observation schedule with Gamma-distributed gaps,
simulates ``n_series`` independent trajectories up to the last time point,
observes them, and fits every requested estimator, timing only the fit.
"""

from __future__ import annotations

import configparser
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, LBDPError
from .estimate import approx_mle, gaussian_mle, gw_estimate, warm_up
from .io import format_number, write_table
from .saddlepoint import saddlepoint_mle
from .simulate import gillespie, make_rng, observe, replicate_seed, sample_schedule, step_values, tau_leap_paths
from .types import ObservationSeries, RateParams

ESTIMATORS = {
    "approx": approx_mle,
    "gaussian": gaussian_mle,
    "saddlepoint": saddlepoint_mle,
    "gw": gw_estimate,
}
METHOD_LABELS = {"approx": "ApproxMLE", "gaussian": "GaussianMLE", "saddlepoint": "Saddlepoint", "gw": "GW"}
SIMULATORS = ("gillespie", "tauleap")
MAX_REDRAWS = 100

REPORT_HEADER = ("lambda", "mu", "gamma_shape", "x0", "n_series", "method", "mae", "mean_runtime_s", "n_failed")


@dataclass(frozen=True)
class BenchConfig:
    lam: float
    mu: float
    x0: int = 100
    n_series: int = 10
    n_timepoints: int = 10
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    simulator: str = "gillespie"
    tau_step: float = 0.01
    M: int = 200
    methods: tuple = ("gaussian", "saddlepoint", "approx")
    seed: int = 0
    workers: int = 1
    timing_repeats: int = 3

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ConfigError("methods must name at least one estimator")
        unknown = [m for m in self.methods if m not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"unknown method(s) {unknown}; choose from {sorted(ESTIMATORS)}")
        if self.simulator not in SIMULATORS:
            raise ConfigError(f"simulator must be one of {SIMULATORS}, got {self.simulator!r}")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.n_timepoints < 2:
            raise ConfigError("n_timepoints must be >= 2")
        if self.x0 < 1 or self.n_series < 1 or self.workers < 1 or self.timing_repeats < 1:
            raise ConfigError("x0, n_series, workers and timing_repeats must be >= 1")
        if not (self.gamma_shape > 0 and self.gamma_rate > 0 and self.tau_step > 0):
            raise ConfigError("gamma_shape, gamma_rate and tau_step must be positive")
        RateParams(self.lam, self.mu)

    @property
    def alpha(self) -> float:
        return self.lam - self.mu


# config-file key -> attribute; every other key maps to itself
_KEY_MAP = {"lambda": "lam"}
_INT_KEYS = {"x0", "n_series", "n_timepoints", "M", "seed", "workers", "timing_repeats"}
_FLOAT_KEYS = {"lam", "mu", "gamma_shape", "gamma_rate", "tau_step"}
_GRID_KEYS = {"lam", "mu", "x0", "n_series", "gamma_shape"}


def _parse_scalar(key: str, text: str):
    try:
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return text


def parse_config(text: str) -> list[BenchConfig]:
    """Parse ``key = value`` lines into one config per grid point.

    ``lambda``, ``mu``, ``x0``, ``n_series`` and ``gamma_shape`` accept
    comma-separated lists; the grid is their Cartesian product with
    ``lambda`` and ``mu`` paired elementwise. ``methods`` is a
    comma-separated list.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[bench]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    fields_ = {f for f in BenchConfig.__dataclass_fields__}
    values: dict = {}
    for raw_key, raw in parser["bench"].items():
        key = _KEY_MAP.get(raw_key, raw_key)
        if key not in fields_:
            raise ConfigError(f"unknown config key {raw_key!r}")
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if key == "methods":
            values[key] = tuple(parts)
        elif key in _GRID_KEYS:
            values[key] = [_parse_scalar(key, p) for p in parts]
        elif len(parts) != 1:
            raise ConfigError(f"{raw_key} takes a single value")
        else:
            values[key] = _parse_scalar(key, parts[0])
    for key in ("lam", "mu"):
        if key not in values:
            raise ConfigError(f"missing required key {'lambda' if key == 'lam' else key!r}")
    if "methods" in values and not values["methods"]:
        raise ConfigError("methods must name at least one estimator")
    lams, mus = values.pop("lam"), values.pop("mu")
    if len(lams) != len(mus):
        raise ConfigError("lambda and mu lists must have the same length")
    grid_keys = [k for k in ("gamma_shape", "x0", "n_series") if k in values]
    grids = [values.pop(k) for k in grid_keys]
    out = []
    for lam, mu in zip(lams, mus):
        for combo in itertools.product(*grids):
            kwargs = dict(values, lam=lam, mu=mu, **dict(zip(grid_keys, combo)))
            out.append(BenchConfig(**kwargs))
    return out


def load_config(path) -> list[BenchConfig]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


@dataclass(frozen=True)
class FitRecord:
    replicate: int
    method: str
    alpha_hat: Optional[float]
    abs_error: Optional[float]
    runtime_s: float
    failure: str = ""


@dataclass(frozen=True)
class BenchRow:
    config: BenchConfig
    method: str
    mae: float
    mean_runtime_s: float
    n_failed: int
    n_ok: int


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def extend(self, other: "BenchReport") -> None:
        self.rows.extend(other.rows)
        self.records.extend(other.records)

    def accuracy_view(self) -> list[tuple]:
        """Rows and records with wall-clock fields removed; equal across reruns with one seed."""
        rows = [(r.config.lam, r.config.mu, r.config.x0, r.config.n_series, r.method, r.mae, r.n_failed, r.n_ok) for r in self.rows]
        recs = [(r.replicate, r.method, r.alpha_hat, r.failure) for r in self.records]
        return rows + recs

    def row(self, method: str, **where) -> BenchRow:
        label = METHOD_LABELS.get(method, method)
        for r in self.rows:
            if r.method == label and all(getattr(r.config, k) == v for k, v in where.items()):
                return r
        raise KeyError(method)


def _simulate_replicate(cfg: BenchConfig, rng: np.random.Generator) -> Optional[list[ObservationSeries]]:
    times = sample_schedule(cfg.n_timepoints, cfg.gamma_shape, cfg.gamma_rate, rng)
    t_max = float(times[-1])
    p = RateParams(cfg.lam, cfg.mu)

    def draw_one():
        if cfg.simulator == "gillespie":
            return observe(gillespie(p, cfg.x0, t_max, rng), times).counts
        grid, sizes = tau_leap_paths(lambda t: p.lam, lambda t: p.mu, cfg.x0, 1, t_max, cfg.tau_step, rng)
        return step_values(grid, sizes[:, 0], times)

    if cfg.simulator == "tauleap":
        grid, sizes = tau_leap_paths(lambda t: p.lam, lambda t: p.mu, cfg.x0, cfg.n_series, t_max, cfg.tau_step, rng)
        columns = [step_values(grid, sizes[:, j], times) for j in range(cfg.n_series)]
    else:
        columns = [draw_one() for _ in range(cfg.n_series)]

    series = []
    for j, counts in enumerate(columns):
        # a path already extinct at the second time point carries no information
        tries = 0
        while counts[1] == 0:
            tries += 1
            if tries > MAX_REDRAWS:
                return None
            counts = draw_one()
        series.append(ObservationSeries(times, counts, str(j)))
    return series


def _timed_fit(fit, series, repeats: int):
    """Fit ``repeats`` times and return the first result with the fastest wall time.

    Fits are deterministic, so repeats only differ in timing; the minimum
    strips cache and scheduler noise the same way for every estimator.
    """
    best = math.inf
    res = None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fit(series)
        best = min(best, time.perf_counter() - start)
        if res is None:
            res = out
    return res, best


def run_replicate(cfg: BenchConfig, rep: int) -> list[FitRecord]:
    rng = make_rng(replicate_seed(cfg.seed, rep))
    series = _simulate_replicate(cfg, rng)
    out = []
    for method in cfg.methods:
        label = METHOD_LABELS[method]
        if series is None:
            out.append(FitRecord(rep, label, None, None, 0.0, "extinct"))
            continue
        start = time.perf_counter()
        try:
            res, elapsed = _timed_fit(ESTIMATORS[method], series, cfg.timing_repeats)
        except LBDPError as exc:
            out.append(FitRecord(rep, label, None, None, time.perf_counter() - start, type(exc).__name__))
            continue
        if not res.converged or res.alpha_hat is None:
            out.append(FitRecord(rep, label, res.alpha_hat, None, elapsed, "not converged"))
        else:
            out.append(FitRecord(rep, label, res.alpha_hat, abs(res.alpha_hat - cfg.alpha), elapsed))
    return out


def _run_chunk(args) -> list[FitRecord]:
    cfg, reps = args
    # compile the estimator kernels before any fit is timed
    warm_up()
    return [rec for rep in reps for rec in run_replicate(cfg, rep)]


def run_bench(cfg: BenchConfig, keep_records: bool = True) -> BenchReport:
    """Run ``cfg.M`` replicates and aggregate MAE and mean fit time per estimator.

    Replicate ``r`` always uses the generator seeded by ``(cfg.seed, r)``,
    so results do not depend on ``cfg.workers``. Failed fits are excluded
    from the MAE and counted in ``n_failed``.
    """
    reps = list(range(cfg.M))
    if cfg.workers == 1:
        records = _run_chunk((cfg, reps))
    else:
        chunks = [reps[i:: cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks if c]))
        records = sorted((r for part in parts for r in part), key=lambda r: (r.replicate, cfg.methods.index(_method_key(r.method))))
    report = BenchReport()
    for method in cfg.methods:
        label = METHOD_LABELS[method]
        mine = [r for r in records if r.method == label]
        ok = [r for r in mine if r.abs_error is not None]
        mae = float(np.mean([r.abs_error for r in ok])) if ok else math.nan
        runtime = float(np.mean([r.runtime_s for r in mine if r.failure != "extinct"] or [math.nan]))
        report.rows.append(BenchRow(cfg, label, mae, runtime, len(mine) - len(ok), len(ok)))
    if keep_records:
        report.records = records
    return report


def _method_key(label: str) -> str:
    return next(k for k, v in METHOD_LABELS.items() if v == label)


def run_grid(configs: Sequence[BenchConfig], keep_records: bool = False) -> BenchReport:
    if not configs:
        raise ConfigError("no configurations to run")
    report = BenchReport()
    for cfg in configs:
        report.extend(run_bench(cfg, keep_records))
    return report


def report_rows(report: BenchReport) -> list[tuple]:
    return [
        (r.config.lam, r.config.mu, r.config.gamma_shape, r.config.x0, r.config.n_series, r.method, r.mae, r.mean_runtime_s, r.n_failed)
        for r in report.rows
    ]


def _fmt(v: float, digits: int) -> str:
    return "nan" if math.isnan(v) else f"{v:.{digits}f}"


def format_text(report: BenchReport) -> str:
    """Aligned tables, one block per (lambda, mu, schedule, simulator), MAE then runtime."""
    blocks: dict = {}
    for r in report.rows:
        c = r.config
        blocks.setdefault((c.lam, c.mu, c.gamma_shape, c.gamma_rate, c.simulator), []).append(r)
    lines = []
    for title, value, digits in (("Mean absolute error of alpha", "mae", 4), ("Mean fit runtime (s)", "mean_runtime_s", 5)):
        lines.append(title)
        lines.append("=" * len(title))
        for (lam, mu, shape, rate, sim), rows in blocks.items():
            cols = sorted({(r.config.x0, r.config.n_series) for r in rows})
            methods = list(dict.fromkeys(r.method for r in rows))
            head = ["Method"] + [f"X0={x0},n={n}" for x0, n in cols]
            body = []
            for m in methods:
                cells = [m]
                for col in cols:
                    hit = [r for r in rows if r.method == m and (r.config.x0, r.config.n_series) == col]
                    cells.append(_fmt(getattr(hit[0], value), digits) if hit else "-")
                body.append(cells)
            widths = [max(len(row[k]) for row in [head] + body) for k in range(len(head))]
            lines.append("")
            lines.append(f"lambda={format_number(lam)}, mu={format_number(mu)}, t_i ~ Gamma({format_number(shape)}, {format_number(rate)}) ({sim})")
            for row in [head] + body:
                lines.append("  ".join(cell.ljust(w) if k == 0 else cell.rjust(w) for k, (cell, w) in enumerate(zip(row, widths))))
        lines.append("")
    return "\n".join(lines)


def emit_report(report: BenchReport, out_dir, formats: Sequence[str] = ("csv", "txt"), comments=None) -> list[Path]:
    """Write ``report.csv`` and/or ``report.txt`` into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out / "report.csv"
            write_table(path, REPORT_HEADER, report_rows(report), comments)
        elif fmt == "txt":
            path = out / "report.txt"
            text = "".join(f"# {c}\n" for c in comments or ()) + format_text(report)
            path.write_text(text, encoding="utf-8")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written.append(path)
    return written
