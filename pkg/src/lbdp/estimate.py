"""Constant-rate growth estimators and their diagnostics.

The central object is the estimating function

    h(alpha) = sum_i t_i / (exp(alpha t_i) - 1) * (X_{i+1} - X_i exp(alpha t_i)),

the alpha-score of the Gaussian transition likelihood with the two terms
that vanish for large populations dropped. Its root is the approximate
MLE. All estimators pool every (series, interval) pair additively.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateData,
    DegenerateVariance,
    InvalidParams,
    NonConvergence,
    NotEquidistant,
    UndefinedEstimate,
)
from . import _kernels
from .types import EstimateResult, ObservationSeries, SeriesLike, as_series_list, make_result

_LOG_2PI = math.log(2.0 * math.pi)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverConfig:
    root_tol: float = 1e-10
    max_iter: int = 200
    bracket_expand: float = 2.0
    alpha_floor: float = 1e-12

    def __post_init__(self):
        if not (self.root_tol > 0 and self.max_iter > 0 and self.bracket_expand > 1 and self.alpha_floor > 0):
            raise InvalidParams("solver settings must be positive (bracket_expand > 1)")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class Pooled:
    """All intervals of all series as flat arrays: gap, start count, end count."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray


def pool(series: SeriesLike) -> Pooled:
    items = as_series_list(series)
    if len(items) == 1:
        s = items[0]
        return Pooled(s.times[1:] - s.times[:-1], s.counts[:-1], s.counts[1:])
    times = np.concatenate([s.times for s in items])
    counts = np.concatenate([s.counts for s in items])
    sizes = np.array([s.times.size for s in items])
    return Pooled(*_kernels.flatten_intervals(times, counts, sizes))


def _has_interior_zero(counts: np.ndarray) -> bool:
    zero = np.flatnonzero(counts == 0)
    return bool(zero.size) and bool(np.any(counts[zero[0]:] > 0))


def _inv_em1(z: np.ndarray) -> np.ndarray:
    """``1 / (exp(z) - 1)`` that returns 0 instead of overflowing."""
    return 1.0 / np.expm1(np.minimum(z, 700.0))


# --------------------------------------------------------------------------
# Galton-Watson estimator


def gw_estimate(series: SeriesLike, cfg: SolverConfig = DEFAULT_CONFIG) -> EstimateResult:
    """Closed-form estimator for observations on a common equidistant grid."""
    start = time.perf_counter()
    data = pool(series)
    tau = float(data.t[0])
    if np.any(np.abs(data.t - tau) > 1e-9 * tau):
        raise NotEquidistant("all intervals must share one spacing")
    num, den = float(data.y.sum()), float(data.x.sum())
    if num == 0 or den == 0:
        raise DegenerateData("pooled counts sum to zero")
    alpha = math.log(num / den) / tau
    sigma2 = None
    if abs(alpha) >= cfg.alpha_floor:
        sigma2 = _try_sigma2(alpha, data)
    return make_result(
        "GW", alpha, sigma2, converged=True, iterations=0, runtime=time.perf_counter() - start
    )


# --------------------------------------------------------------------------
# approximate MLE


def _h(alpha: float, d: Pooled) -> float:
    # t (y - x e)/(e - 1) == t (y - x)/(e - 1) - t x
    return float(np.dot(d.t, (d.y - d.x) * _inv_em1(alpha * d.t) - d.x))


def h_function(alpha: float, series: SeriesLike) -> float:
    if alpha == 0:
        raise InvalidParams("h is undefined at alpha = 0")
    return _h(float(alpha), pool(series))


_STATUS_MESSAGES = {
    _kernels.VANISHING: "h does not change sign on the half-line (all counts vanish)",
    _kernels.BEYOND_RANGE: "root lies beyond the representable growth range",
    _kernels.NO_BRACKET: "no sign change found while searching for a bracket",
    _kernels.UNRESOLVED: "root not resolved within the iteration limit",
}


def approx_mle(series: SeriesLike, cfg: SolverConfig = DEFAULT_CONFIG) -> EstimateResult:
    """Approximate MLE of the growth rate: the root of ``h``.

    A zero pooled net change returns ``alpha = 0`` directly (``h`` has no
    root then). Zero counts are allowed anywhere after the first
    observation; they contribute to ``h`` and are skipped in the variance
    plug-in.

    The search works in ``u = sign * alpha > 0``, where ``h`` is ``+inf`` at
    ``0+`` and negative for large ``u``: Newton steps inside a maintained
    sign-change bracket, replaced by bisection when they leave it or stall.
    A failed search gives ``converged=False`` with the reason in ``warnings``.
    """
    start = time.perf_counter()
    items = [series] if isinstance(series, ObservationSeries) else as_series_list(series)
    if len(items) == 1:
        times, counts = items[0].times, items[0].counts
        sizes = np.array([times.size])
    else:
        times = np.concatenate([s.times for s in items])
        counts = np.concatenate([s.counts for s in items])
        sizes = np.array([s.times.size for s in items])
    alpha, evals, status, sigma2 = _kernels.approx_fit(
        times, counts, sizes, cfg.root_tol, cfg.max_iter, cfg.bracket_expand, cfg.alpha_floor
    )
    if status in _STATUS_MESSAGES:
        return make_result(
            "ApproxMLE",
            None,
            None,
            converged=False,
            iterations=cfg.max_iter,
            runtime=time.perf_counter() - start,
            warnings=(_STATUS_MESSAGES[status],),
        )
    return make_result(
        "ApproxMLE",
        alpha,
        None if math.isnan(sigma2) else sigma2,
        converged=True,
        iterations=evals,
        runtime=time.perf_counter() - start,
    )


def warm_up() -> None:
    """Compile (or load from cache) the solver kernels so later calls are not charged for it."""
    # single series pass read-only views, several series pass fresh arrays;
    # numba compiles each layout separately
    s = ObservationSeries([0.0, 1.0, 2.5], [10.0, 12.0, 15.0])
    approx_mle(s)
    approx_mle([s, s])


# --------------------------------------------------------------------------
# variance plug-in


def _sigma2_terms(alpha: float, d: Pooled, form: str) -> np.ndarray:
    t, x, y = d.t, d.x, d.y
    if not x.min() > 0:
        keep = x > 0
        t, x, y = t[keep], x[keep], y[keep]
        if t.size == 0:
            raise UndefinedEstimate("every interval starts from a zero count")
    em1 = np.expm1(alpha * t)
    e = em1 + 1.0
    if form == "profile":
        return (y - x * e) ** 2 / (x * e * em1)
    if form == "literal":
        return x * e / em1 * (y / e - x) ** 2
    raise ValueError(f"unknown form {form!r}")


def sigma2_plugin(alpha_hat: float, series: SeriesLike, form: str = "profile") -> float:
    """Variance-scale estimate at a given growth rate.

    ``form="profile"`` (default) is the Gaussian maximizer of ``sigma2`` at
    fixed alpha, the average of ``(X_{i+1} - X_i e)^2 / (X_i e (e - 1))``; it
    scales linearly with the counts, as a variance ratio must.
    ``form="literal"`` evaluates ``X_i e / (e - 1) * (X_{i+1} / e - X_i)^2``
    averaged, the textbook-printed variant, which scales with the cube of the
    counts. Intervals starting at zero are skipped and the divisor reduced.
    """
    if alpha_hat == 0:
        raise InvalidParams("sigma2 is undefined at alpha = 0")
    return float(np.mean(_sigma2_terms(float(alpha_hat), pool(series), form)))


def _try_sigma2(alpha: float, d: Pooled) -> Optional[float]:
    try:
        return float(np.mean(_sigma2_terms(alpha, d, "profile")))
    except UndefinedEstimate:
        return None


# --------------------------------------------------------------------------
# Gaussian approximation


def _positive_start(d: Pooled) -> Pooled:
    keep = d.x > 0
    if keep.all():
        return d
    return Pooled(d.t[keep], d.x[keep], d.y[keep])


def gaussian_loglik(alpha: float, sigma2: float, series: SeriesLike) -> float:
    """Joint Gaussian-transition log-likelihood over intervals with ``X_i > 0``."""
    return _gaussian_loglik(float(alpha), float(sigma2), _positive_start(pool(series)))


def _gaussian_loglik(alpha: float, sigma2: float, d: Pooled) -> float:
    em1 = np.expm1(alpha * d.t)
    e = em1 + 1.0
    var = sigma2 * d.x * e * em1
    if np.any(var <= 0):
        raise DegenerateVariance("transition variance must be positive (sign(alpha) == sign(sigma2))")
    r = d.y - d.x * e
    return float(-0.5 * np.sum(_LOG_2PI + np.log(var)) - 0.5 * np.sum(r * r / var))


def _neg_profile(alpha: float, d: Pooled) -> float:
    """Negative profile log-likelihood with sigma2 maximized out (constants dropped)."""
    em1 = np.expm1(alpha * d.t)
    v = d.x * (em1 + 1.0) * em1
    r = d.y - d.x * (em1 + 1.0)
    s2 = np.mean(r * r / v)
    if s2 == 0:
        return -math.inf
    return 0.5 * float(np.sum(np.log(np.abs(v)))) + 0.5 * d.t.size * math.log(abs(s2))


def _golden_max(fneg, a0: float, cfg: SolverConfig) -> tuple[float, int]:
    """Minimize ``fneg`` from ``a0``: downhill bracket expansion, then golden-section."""
    evals = 0
    floor = cfg.alpha_floor

    def f(a):
        nonlocal evals
        evals += 1
        if abs(a) < floor:
            a = floor if a >= 0 else -floor
        val = fneg(a)
        return val if not math.isnan(val) else math.inf

    h = max(0.1 * abs(a0), 1e-3)
    a, b = a0, a0 + h
    fa, fb = f(a), f(b)
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    grow = 1.0 + 1.0 / _INV_PHI
    c = b + grow * (b - a)
    fc = f(c)
    n = 0
    while fc < fb:
        n += 1
        if n > cfg.max_iter:
            raise NonConvergence("could not bracket the likelihood maximum")
        a, b, fa, fb = b, c, fb, fc
        c = b + grow * (b - a)
        fc = f(c)
    lo, hi = (a, c) if a < c else (c, a)
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(cfg.max_iter):
        if hi - lo < max(cfg.root_tol, 1e-9 * abs(x1)):
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    else:
        raise NonConvergence("golden-section search did not converge")
    best = x1 if f1 <= f2 else x2
    return best, evals


def crude_alpha(d: Pooled) -> float:
    """Pooled log-ratio over the count-weighted mean gap; a starting value only."""
    sx, sy = float(d.x.sum()), float(d.y.sum())
    gap = float(np.dot(d.t, d.x)) / sx if sx > 0 else float(d.t.mean())
    if sx > 0 and sy > 0 and sx != sy:
        return math.log(sy / sx) / gap
    return 0.1 / gap


def gaussian_mle(series: SeriesLike, cfg: SolverConfig = DEFAULT_CONFIG) -> EstimateResult:
    """Joint Gaussian-approximation MLE of ``(alpha, sigma2)``.

    ``sigma2`` is profiled out in closed form and the one-dimensional
    profile likelihood in alpha is maximized by golden-section search.
    Intervals starting from zero are dropped; series with a zero followed by
    a positive count are reported in ``warnings``.
    """
    start = time.perf_counter()
    items = as_series_list(series)
    warnings = tuple(
        f"series {s.series_id or k} has an interior zero" for k, s in enumerate(items) if _has_interior_zero(s.counts)
    )
    d = _positive_start(pool(items))
    if d.t.size == 0:
        raise DegenerateData("no interval starts from a positive count")
    try:
        alpha, evals = _golden_max(lambda a: _neg_profile(a, d), crude_alpha(d), cfg)
    except NonConvergence as exc:
        return make_result(
            "GaussianMLE",
            None,
            None,
            converged=False,
            iterations=cfg.max_iter,
            runtime=time.perf_counter() - start,
            warnings=warnings + (str(exc),),
        )
    sigma2 = float(np.mean(_sigma2_terms(alpha, d, "profile")))
    if sigma2 == 0:
        raise DegenerateVariance("profile variance is zero at the maximum")
    return make_result(
        "GaussianMLE",
        alpha,
        sigma2,
        converged=True,
        iterations=evals,
        runtime=time.perf_counter() - start,
        warnings=warnings,
    )


# --------------------------------------------------------------------------
# diagnostics


def l_decomposition(alpha, sigma2, x, x_next, t):
    """The three additive parts of the per-interval alpha-score.

    ``l1`` is the residual term kept by the approximate estimator, ``l2``
    the squared-residual term and ``l3`` the log-variance term; they sum to
    the exact derivative of the Gaussian log-density. Broadcasts over arrays.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    em1 = np.expm1(alpha * t)
    e = em1 + 1.0
    r = x_next - x * e
    l1 = t * r / (sigma2 * em1)
    l2 = t * r * r * (2.0 * e - 1.0) / (2.0 * x * sigma2 * e * em1 * em1)
    l3 = -t / 2.0 - t * e / (2.0 * em1)
    return l1, l2, l3


def _normalizer(alpha0: float, s) -> float:
    t = np.diff(s.times)
    big_t = s.times[:-1] - s.times[0]
    return float(s.counts[0] * np.dot(t, np.exp(alpha0 * big_t)))


def g_function(alpha: float, alpha0: float, series: SeriesLike) -> float:
    """``h(alpha)`` divided by ``X_1 * sum_i t_i exp(alpha0 T_i)`` (pooled over series)."""
    items = as_series_list(series)
    norm = sum(_normalizer(alpha0, s) for s in items)
    return _h(float(alpha), pool(items)) / norm


def g_star(alpha: float, alpha0: float, times) -> float:
    """Large-population limit of :func:`g_function` for one schedule.

    ``sum_i w_i (exp(alpha0 t_i) - exp(alpha t_i)) / (exp(alpha t_i) - 1) / sum_i w_i``
    with ``w_i = t_i exp(alpha0 T_i)`` and ``T_i`` measured from the first time.
    """
    times = np.asarray(times, dtype=np.float64)
    t = np.diff(times)
    w = t * np.exp(alpha0 * (times[:-1] - times[0]))
    ratio = (np.exp(alpha0 * t) - np.exp(alpha * t)) / np.expm1(alpha * t)
    return float(np.dot(w, ratio) / w.sum())


def pseudo_loglik(alpha: float, sigma2: float, alpha0: float, series: SeriesLike) -> float:
    """Log-likelihood surrogate anchored at ``alpha0`` and built from ``h``.

    ``l(alpha0, sigma2) + (1/sigma2) sum_i [(X_{i+1} - X_i) |log((e^{alpha0 t_i} - 1)/(e^{alpha t_i} - 1))|
    - X_{i+1} |alpha0 - alpha| t_i]``; for ``alpha > alpha0 > 0`` this equals the
    integral of the summed ``l1`` terms from ``alpha0`` to ``alpha``.
    """
    d = _positive_start(pool(series))
    anchor = _gaussian_loglik(float(alpha0), float(sigma2), d)
    ratio = np.expm1(alpha0 * d.t) / np.expm1(alpha * d.t)
    delta = (d.y - d.x) * np.abs(np.log(ratio)) - d.y * abs(alpha0 - alpha) * d.t
    return anchor + float(delta.sum()) / sigma2
