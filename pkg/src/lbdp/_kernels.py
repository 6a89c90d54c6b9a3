"""Compiled inner loops of the approximate estimator.

The root search runs thousands of times per benchmark on arrays of a few
dozen intervals, where per-call array overhead would dominate; these loops
are compiled once and cached on disk.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# status codes returned by solve_h
OK = 0
ZERO_NET = 1
VANISHING = 2
BEYOND_RANGE = 3
NO_BRACKET = 4
UNRESOLVED = 5

_EXP_LIMIT = 700.0


@njit(cache=True)
def _f(u, sign, t, diff, tx):
    """``h(sign * u)`` and its derivative in ``u``."""
    value = -tx
    slope = 0.0
    for i in range(t.size):
        z = sign * u * t[i]
        inv = 1.0 / math.expm1(z)
        value += t[i] * diff[i] * inv
        # d/dz 1/(e^z - 1) = -inv (1 + inv); dz/du = sign t
        slope -= sign * t[i] * t[i] * diff[i] * inv * (1.0 + inv)
    return value, slope


@njit(cache=True)
def solve_h(t, x, y, root_tol, max_iter, bracket_expand, alpha_floor):
    """Safeguarded Newton root search for ``h`` on the half-line of ``sign(sum(y - x))``.

    Returns ``(alpha, evaluations, status)``.
    """
    n = t.size
    diff = np.empty(n)
    net = 0.0
    tx = 0.0
    ty = 0.0
    sx = 0.0
    tmax = 0.0
    for i in range(n):
        diff[i] = y[i] - x[i]
        net += diff[i]
        tx += t[i] * x[i]
        ty += t[i] * y[i]
        sx += x[i]
        tmax = max(tmax, t[i])
    if net == 0.0:
        return 0.0, 0, ZERO_NET
    sign = 1.0 if net > 0.0 else -1.0
    if not ((tx if sign > 0.0 else ty) > 0.0):
        return math.nan, 0, VANISHING
    u_max = _EXP_LIMIT / tmax
    sy = sx + net

    mean_gap = tx / sx if sx > 0.0 else 0.0
    if not mean_gap > 0.0:
        s = 0.0
        for i in range(n):
            s += t[i]
        mean_gap = s / n
    if sx > 0.0 and sy > 0.0:
        u = abs(math.log(sy / sx)) / mean_gap
    else:
        u = 1.0 / mean_gap
    if not (math.isfinite(u) and u > alpha_floor):
        u = 1.0 / mean_gap
    u = min(u, u_max)

    evals = 1
    fu, du = _f(u, sign, t, diff, tx)
    if fu == 0.0:
        return sign * u, evals, OK

    # Move towards the root until the sign flips, using a slightly lengthened
    # Newton step when it points the right way and a fixed factor otherwise.
    # Steps are at least root_tol so a start next to the root cannot stall.
    lo = 0.0
    hi = 0.0
    found = False
    for _ in range(max_iter):
        if fu > 0.0:
            if u >= u_max:
                return math.nan, evals, BEYOND_RANGE
            if du < 0.0:
                trial = min(u + max(-1.05 * fu / du, root_tol), u * 64.0)
            else:
                trial = u * bracket_expand
            trial = min(trial, u_max)
        else:
            cand = u - max(1.05 * fu / du, root_tol) if du < 0.0 else 0.0
            trial = max(cand, u / 64.0) if cand > 0.0 else u / bracket_expand
            if trial < alpha_floor:
                return sign * alpha_floor, evals, OK
        evals += 1
        ft, dt = _f(trial, sign, t, diff, tx)
        if ft == 0.0:
            return sign * trial, evals, OK
        if (ft > 0.0) != (fu > 0.0):
            if fu > 0.0:
                lo, hi = u, trial
            else:
                lo, hi = trial, u
            u, fu, du = trial, ft, dt
            found = True
            break
        u, fu, du = trial, ft, dt
    if not found:
        return math.nan, evals, NO_BRACKET

    step_old = math.inf
    for _ in range(max_iter):
        use_newton = du != 0.0
        cand = 0.0
        if use_newton:
            cand = u - fu / du
            # a converged step may land exactly on the bracket end it started from
            if abs(u - cand) < root_tol and lo <= cand <= hi:
                return sign * cand, evals, OK
            use_newton = lo < cand < hi and abs(u - cand) < 0.5 * step_old
        if use_newton:
            step = abs(u - cand)
            u = cand
        else:
            step = 0.5 * (hi - lo)
            u = lo + step
        step_old = step
        if step < root_tol or hi - lo < root_tol:
            return sign * u, evals, OK
        evals += 1
        fu, du = _f(u, sign, t, diff, tx)
        if fu == 0.0:
            return sign * u, evals, OK
        if fu > 0.0:
            lo = u
        else:
            hi = u
    return math.nan, evals, UNRESOLVED


@njit(cache=True)
def profile_sigma2(t, x, y, alpha):
    """Mean of ``(y - x e)^2 / (x e (e - 1))`` over intervals with ``x > 0``; NaN if none."""
    total = 0.0
    count = 0
    for i in range(t.size):
        if x[i] > 0.0:
            em1 = math.expm1(alpha * t[i])
            e = em1 + 1.0
            r = y[i] - x[i] * e
            total += r * r / (x[i] * e * em1)
            count += 1
    if count == 0:
        return math.nan
    return total / count


@njit(cache=True)
def flatten_intervals(times, counts, sizes):
    """Gaps, start counts and end counts of concatenated series with the given lengths."""
    n_int = times.size - sizes.size
    t = np.empty(n_int)
    x = np.empty(n_int)
    y = np.empty(n_int)
    k = 0
    pos = 0
    for m in sizes:
        for i in range(pos, pos + m - 1):
            t[k] = times[i + 1] - times[i]
            x[k] = counts[i]
            y[k] = counts[i + 1]
            k += 1
        pos += m
    return t, x, y


@njit(cache=True)
def approx_fit(times, counts, sizes, root_tol, max_iter, bracket_expand, alpha_floor):
    """Pool the series, solve ``h = 0`` and evaluate the variance plug-in in one call.

    Returns ``(alpha, evaluations, status, sigma2)``; ``sigma2`` is NaN when
    undefined.
    """
    t, x, y = flatten_intervals(times, counts, sizes)
    alpha, evals, status = solve_h(t, x, y, root_tol, max_iter, bracket_expand, alpha_floor)
    sigma2 = math.nan
    if status == OK and abs(alpha) >= alpha_floor:
        sigma2 = profile_sigma2(t, x, y, alpha)
    return alpha, evals, status, sigma2
