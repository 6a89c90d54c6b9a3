"""Saddlepoint-approximation MLE of the birth and death rates.

Each transition ``X_{i+1} | X_i = x`` is a sum of ``x`` iid single-ancestor
families with probability generating function

    f1(z) = A + (1 - A)(1 - B) z / (1 - B z),

so the cumulant generating function in ``w = log z`` is
``K(w) = x log f1(e^w)``. The density approximation is
``exp(K(w) - w y) / sqrt(2 pi K''(w))`` at the saddle ``K'(w) = y``.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateData, InnerSolveFailure
from .estimate import DEFAULT_CONFIG, Pooled, SolverConfig, _positive_start, _sigma2_terms, crude_alpha, pool
from .transition import SERIES_THRESHOLD
from .types import EstimateResult, SeriesLike, make_result

_LOG_2PI = math.log(2.0 * math.pi)
_INNER_TOL = 1e-12
_INNER_MAX = 100
_MAX_STEP = 8.0


def coeff_arrays(lam: float, mu: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``(A, B, 1 - A - B)`` over interval lengths ``t``."""
    alpha = lam - mu
    z = alpha * t
    small = np.abs(z) < SERIES_THRESHOLD
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        k = np.where(small, 1.0 / (t * (1.0 + z / 2.0 + z * z / 6.0)), alpha / np.expm1(np.minimum(z, 700.0)))
    denom = lam + k
    a, b, c = mu / denom, lam / denom, (k - mu) / denom
    return a, b, c


def saddle_equation_roots(x, y, a, b, c):
    """Closed-form saddle ``z`` from ``r B c z^2 + (q + r A B - r c) z - r A = 0``, ``r = y/x``.

    Provided as an independent check on the iterative solver; valid for
    ``0 < y``, ``A > 0`` and ``B > 0``.
    """
    r = np.asarray(y, dtype=float) / np.asarray(x, dtype=float)
    q = (1.0 - a) * (1.0 - b)
    qa, qb, qc = r * b * c, q + r * (a * b - c), -r * a
    disc = np.sqrt(qb * qb - 4.0 * qa * qc)
    # root in (0, 1/B); written to avoid cancellation for either sign of qb
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(qb > 0, 2.0 * (-qc) / (qb + disc), (-qb + disc) / (2.0 * qa))
        z = np.where(qa == 0, -qc / qb, z)
    return z


def _cgf_parts(w, a, b, c, q):
    z = np.exp(w)
    d1 = 1.0 - b * z
    d2 = a + c * z
    g = q * z / (d1 * d2)
    curv = 1.0 + b * z / d1 - c * z / d2
    return z, d1, d2, g, curv


def solve_saddle(x, y, a, b, c) -> tuple[np.ndarray, np.ndarray]:
    """Saddle ``w`` with ``K'(w) = y`` for each interval (``y > 0``), by safeguarded Newton.

    Newton runs on ``log K'(w) - log y``, which is increasing in ``w``; each
    interval keeps a bracket that shrinks on every evaluation, and a step
    that leaves its bracket is replaced by bisection (or a capped step while
    the bracket is still unbounded). Returns ``(w, ok)``.
    """
    q = (1.0 - a) * (1.0 - b)
    target = np.log(y) - np.log(x)
    lo = np.full(x.shape, -np.inf)
    with np.errstate(divide="ignore"):
        hi = np.where(b > 0, -np.log(b), np.inf)
    w = np.minimum(0.0, hi - 1.0)
    ok = np.zeros(x.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(_INNER_MAX):
            z, d1, d2, g, curv = _cgf_parts(w, a, b, c, q)
            phi = np.log(g) - target
            bad = ~np.isfinite(phi) | ~(curv > 0)
            lo = np.where(~bad & (phi < 0), w, lo)
            hi = np.where(~bad & (phi > 0), w, hi)
            step = np.where(bad, 0.0, -phi / np.where(bad, 1.0, curv))
            step = np.clip(step, -_MAX_STEP, _MAX_STEP)
            new = w + step
            outside = bad | ~((new > lo) & (new < hi))
            mid = np.where(
                np.isfinite(lo) & np.isfinite(hi),
                0.5 * (lo + hi),
                np.where(
                    np.isfinite(hi),
                    hi - np.maximum(1.0, 2.0 * np.abs(hi - w)),
                    np.where(np.isfinite(lo), lo + np.maximum(1.0, 2.0 * np.abs(w - lo)), w - 1.0),
                ),
            )
            new = np.where(outside, mid, new)
            ok = ~bad & ((np.abs(phi) < _INNER_TOL) | (np.abs(new - w) < _INNER_TOL * np.maximum(1.0, np.abs(w))))
            w = np.where(ok, w, new)
            if ok.all():
                break
    return w, ok


def log_density(x, y, a, b, c) -> tuple[np.ndarray, np.ndarray]:
    """Saddlepoint log-density of each transition ``x -> y`` (``x > 0``).

    Edge cases are answered exactly: ``y = 0`` is extinction (``x log A``),
    and when one coefficient is zero the boundary values ``y = x`` have
    closed forms. Returns ``(values, ok)``; ``ok`` is False where the saddle
    search failed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(x.shape, -np.inf)
    ok = np.ones(x.shape, dtype=bool)

    zero = y == 0
    with np.errstate(divide="ignore"):
        out[zero] = x[zero] * np.log(a[zero])
    # with A = 0 every ancestor survives, so y >= x; with B = 0 nobody grows, so y <= x
    pure_birth = ~zero & (a == 0)
    pure_death = ~zero & (b == 0) & (a > 0)
    on_edge = (pure_birth | pure_death) & (y == x)
    out[on_edge & pure_birth] = x[on_edge & pure_birth] * np.log1p(-b[on_edge & pure_birth])
    out[on_edge & pure_death] = x[on_edge & pure_death] * np.log1p(-a[on_edge & pure_death])
    impossible = (pure_birth & (y < x)) | (pure_death & (y > x))

    inner = ~zero & ~on_edge & ~impossible
    if inner.any():
        xi, yi, ai, bi, ci = x[inner], y[inner], a[inner], b[inner], c[inner]
        w, good = solve_saddle(xi, yi, ai, bi, ci)
        q = (1.0 - ai) * (1.0 - bi)
        with np.errstate(divide="ignore", invalid="ignore"):
            z, d1, d2, g, curv = _cgf_parts(w, ai, bi, ci, q)
            k = xi * np.log(d2 / d1)
            k2 = xi * g * curv
            val = k - w * yi - 0.5 * (_LOG_2PI + np.log(k2))
        good &= np.isfinite(val)
        out[inner] = np.where(good, val, -np.inf)
        ok[inner] = good
    return out, ok


def saddlepoint_loglik(lam: float, mu: float, series: SeriesLike) -> float:
    """Summed saddlepoint log-density over all intervals starting from a positive count."""
    d = _positive_start(pool(series))
    a, b, c = coeff_arrays(lam, mu, d.t)
    vals, ok = log_density(d.x, d.y, a, b, c)
    if not ok.all():
        raise InnerSolveFailure(f"saddle not found for {int((~ok).sum())} interval(s)")
    return float(vals.sum())


def _start_point(d: Pooled) -> tuple[float, float]:
    alpha = crude_alpha(d)
    try:
        s2 = float(np.mean(_sigma2_terms(alpha, d, "profile")))
    except Exception:
        s2 = 3.0
    s2 = math.copysign(max(abs(s2), 1.05), alpha)
    lam = alpha * (s2 + 1.0) / 2.0
    mu = alpha * (s2 - 1.0) / 2.0
    return lam, mu


def saddlepoint_mle(series: SeriesLike, cfg: SolverConfig = DEFAULT_CONFIG) -> EstimateResult:
    """Maximize the saddlepoint log-likelihood over ``(log lam, log mu)`` by Nelder-Mead.

    Intervals whose saddle cannot be located count as ``-inf`` during the
    search; if any remain at the optimum the fit is flagged as not converged.
    """
    start = time.perf_counter()
    d = _positive_start(pool(series))
    if d.t.size == 0:
        raise DegenerateData("no interval starts from a positive count")
    lam0, mu0 = _start_point(d)

    def objective(v):
        lam, mu = math.exp(v[0]), math.exp(v[1])
        a, b, c = coeff_arrays(lam, mu, d.t)
        vals, _ = log_density(d.x, d.y, a, b, c)
        total = float(vals.sum())
        return -total if math.isfinite(total) else math.inf

    res = minimize(
        objective,
        np.log([lam0, mu0]),
        method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 10 * cfg.max_iter, "maxfev": 20 * cfg.max_iter},
    )
    lam, mu = float(math.exp(res.x[0])), float(math.exp(res.x[1]))
    a, b, c = coeff_arrays(lam, mu, d.t)
    _, ok = log_density(d.x, d.y, a, b, c)
    warnings = []
    if not res.success:
        warnings.append(f"simplex search stopped: {res.message}")
    if not ok.all():
        warnings.append(f"saddle not found for {int((~ok).sum())} interval(s) at the optimum")
    alpha = lam - mu
    sigma2 = (lam + mu) / alpha if alpha != 0 else None
    converged = bool(res.success and ok.all() and math.isfinite(res.fun))
    return make_result(
        "Saddlepoint",
        alpha,
        sigma2,
        converged=converged,
        iterations=int(res.nit),
        runtime=time.perf_counter() - start,
        warnings=warnings,
        rates=(lam, mu),
    )
