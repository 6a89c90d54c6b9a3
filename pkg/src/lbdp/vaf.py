"""Growth-rate fits for longitudinal variant allele frequencies.

Allele frequencies are turned into mutant pseudo-counts under an assumed
constant wild-type population, fitted per (subject, mutation) and then
summarized per mutation with across-subject quantile intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyGroup, InvalidSeries, LBDPError, OutOfRange
from .estimate import DEFAULT_CONFIG, SolverConfig, approx_mle, gaussian_mle, gw_estimate
from .io import read_dict_rows, write_table
from .saddlepoint import saddlepoint_mle
from .simulate import make_rng, sample_skeleton
from .types import EstimateResult, ObservationSeries, RateParams, make_result

DEFAULT_WILDTYPE = 200_000.0

VAF_HEADER = ("subject_id", "mutation", "time", "vaf")
SUMMARY_HEADER = ("mutation", "method", "mean_alpha_pct", "ci_low", "ci_high", "n_subjects")

FITTERS = {
    "approx": approx_mle,
    "gaussian": gaussian_mle,
    "saddlepoint": saddlepoint_mle,
    "gw": gw_estimate,
}
# estimators whose zero-net-change convention gives alpha = 0 for an all-zero group
_ZERO_ROOT = ("approx", "gw")


@dataclass(frozen=True)
class VafRecord:
    subject_id: str
    mutation: str
    time: float
    vaf: float

    def __post_init__(self):
        if not (math.isfinite(self.time) and math.isfinite(self.vaf)):
            raise InvalidSeries(f"non-finite time or vaf in {self}")
        if self.vaf < 0:
            raise OutOfRange(f"negative vaf {self.vaf}")


@dataclass(frozen=True)
class CohortFit:
    """Outcome for one (subject, mutation) group.

    ``alpha_pct`` is ``None`` when the group was skipped or the fit failed;
    ``note`` then says why.
    """

    subject_id: str
    mutation: str
    result: Optional[EstimateResult]
    alpha_pct: Optional[float]
    note: str = ""


@dataclass(frozen=True)
class MutationSummary:
    mutation: str
    method: str
    mean_alpha: float
    ci_low: float
    ci_high: float
    n_subjects: int


def vaf_to_count(vaf, wildtype_pop: float = DEFAULT_WILDTYPE, exact: bool = False):
    """Pseudo-count of mutant cells for an allele frequency.

    The default uses ``X = v / (1 - v) * 2W``. With ``exact=True`` the
    algebraic inverse of ``v = X / (2 (X + W))`` is used instead,
    ``X = 2 v W / (1 - 2 v)``.

    Raises:
        OutOfRange: for ``v < 0``, ``v >= 1`` (default) or ``v >= 0.5`` (exact).
    """
    if not wildtype_pop > 0:
        raise OutOfRange(f"wild-type population must be positive, got {wildtype_pop}")
    v = np.asarray(vaf, dtype=np.float64)
    upper = 0.5 if exact else 1.0
    if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v >= upper):
        raise OutOfRange(f"vaf must lie in [0, {upper}) for this transform")
    if exact:
        x = 2.0 * v * wildtype_pop / (1.0 - 2.0 * v)
    else:
        x = v / (1.0 - v) * 2.0 * wildtype_pop
    return float(x) if x.ndim == 0 else x


def count_to_vaf(count, wildtype_pop: float = DEFAULT_WILDTYPE, exact: bool = False):
    """Inverse of :func:`vaf_to_count` for the same mode."""
    x = np.asarray(count, dtype=np.float64)
    if np.any(x < 0):
        raise OutOfRange("counts must be nonnegative")
    if exact:
        v = x / (2.0 * (x + wildtype_pop))
    else:
        v = x / (x + 2.0 * wildtype_pop)
    return float(v) if v.ndim == 0 else v


def read_vaf_csv(source) -> list[VafRecord]:
    rows = read_dict_rows(source, VAF_HEADER)
    out = []
    for row in rows:
        try:
            out.append(VafRecord(row["subject_id"], row["mutation"], float(row["time"]), float(row["vaf"])))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, LBDPError):
                raise
            raise InvalidSeries(f"bad number in row {row}") from exc
    return out


def write_vaf_csv(target, records: Iterable[VafRecord], comments=None) -> None:
    write_table(target, VAF_HEADER, ((r.subject_id, r.mutation, r.time, r.vaf) for r in records), comments)


def group_records(records: Sequence[VafRecord]) -> dict[tuple[str, str], list[VafRecord]]:
    """Group by (subject, mutation) in first-appearance order, each sorted by time."""
    groups: dict[tuple[str, str], list[VafRecord]] = {}
    for r in records:
        groups.setdefault((r.subject_id, r.mutation), []).append(r)
    return {k: sorted(v, key=lambda r: r.time) for k, v in groups.items()}


def _zero_fit(method: str) -> EstimateResult:
    label = "ApproxMLE" if method == "approx" else "GW"
    return make_result(label, 0.0, None, converged=True, iterations=0, runtime=0.0,
                       warnings=("all pseudo-counts are zero",))


def fit_cohort(
    records: Sequence[VafRecord],
    method: str = "approx",
    exact: bool = False,
    wildtype_pop: float = DEFAULT_WILDTYPE,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> list[CohortFit]:
    """Fit each (subject, mutation) group; errors are recorded per group, never raised.

    Leading zero frequencies are dropped because a series has to start from a
    positive count. Groups with fewer than two timepoints are skipped.
    """
    if method not in FITTERS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(FITTERS)}")
    fit = FITTERS[method]
    out = []
    for (sid, mut), group in group_records(records).items():
        if len(group) < 2:
            out.append(CohortFit(sid, mut, None, None, "skipped: fewer than two timepoints"))
            continue
        try:
            times = np.array([r.time for r in group])
            counts = vaf_to_count([r.vaf for r in group], wildtype_pop, exact)
            if not np.any(counts > 0):
                if method in _ZERO_ROOT:
                    out.append(CohortFit(sid, mut, _zero_fit(method), 0.0, "all pseudo-counts are zero"))
                else:
                    out.append(CohortFit(sid, mut, None, None, "skipped: all pseudo-counts are zero"))
                continue
            first = int(np.argmax(counts > 0))
            if counts.size - first < 2:
                out.append(CohortFit(sid, mut, None, None, "skipped: fewer than two timepoints after the first positive"))
                continue
            series = ObservationSeries(times[first:], counts[first:], f"{sid}:{mut}")
            res = fit(series, cfg)
        except LBDPError as exc:
            out.append(CohortFit(sid, mut, None, None, f"failed: {type(exc).__name__}: {exc}"))
            continue
        if res.converged and res.alpha_hat is not None:
            out.append(CohortFit(sid, mut, res, 100.0 * res.alpha_hat))
        else:
            out.append(CohortFit(sid, mut, res, None, "failed: not converged"))
    return out


def summarize(fits: Sequence[CohortFit], method: str = "approx") -> list[MutationSummary]:
    """Mean and 2.5%/97.5% quantiles of per-subject growth rates, per mutation.

    Raises:
        EmptyGroup: if some mutation has no successful fit.
    """
    by_mut: dict[str, list[float]] = {}
    for f in fits:
        vals = by_mut.setdefault(f.mutation, [])
        if f.alpha_pct is not None:
            vals.append(f.alpha_pct)
    out = []
    for mut, vals in by_mut.items():
        if not vals:
            raise EmptyGroup(f"no successful fit for mutation {mut!r}")
        a = np.asarray(vals)
        lo, hi = np.quantile(a, [0.025, 0.975], method="linear")
        out.append(MutationSummary(mut, method, float(a.mean()), float(lo), float(hi), a.size))
    return out


def summary_rows(summaries: Iterable[MutationSummary]):
    return [(s.mutation, s.method, s.mean_alpha, s.ci_low, s.ci_high, s.n_subjects) for s in summaries]


def synthetic_cohort(
    alpha: float,
    sigma2: float,
    n_subjects: int,
    mutations: Sequence[str] = ("DNMT3A",),
    x0: float = 2000.0,
    n_visits: int = 5,
    span: float = 10.0,
    wildtype_pop: float = DEFAULT_WILDTYPE,
    exact: bool = False,
    seed=0,
) -> list[VafRecord]:
    """Simulated allele-frequency cohort with known growth parameters.

    Each subject gets ``n_visits`` sorted uniform visit times on ``[0, span]``
    (the first at 0), a birth-death count path from ``x0`` with rates implied
    by ``(alpha, sigma2)``, and frequencies from the forward map of the chosen
    transform. Paths that die out are redrawn.
    """
    lam = alpha * (sigma2 + 1.0) / 2.0
    mu = alpha * (sigma2 - 1.0) / 2.0
    p = RateParams(lam, mu)
    rng = make_rng(seed)
    out = []
    for mut in mutations:
        for k in range(n_subjects):
            sid = f"S{k:04d}"
            while True:
                inner = np.sort(rng.uniform(0.0, span, n_visits - 1))
                times = np.concatenate([[0.0], inner])
                if np.all(np.diff(times) > 0):
                    break
            for _ in range(100):
                s = sample_skeleton(p, int(x0), times, rng)
                if s.counts[-1] > 0:
                    break
            vafs = count_to_vaf(s.counts, wildtype_pop, exact)
            out.extend(VafRecord(sid, mut, float(t), float(v)) for t, v in zip(times, vafs))
    return out
