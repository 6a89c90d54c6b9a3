"""Simulation of linear birth-death trajectories and observation schedules.

Every function takes a ``seed`` that may be an integer, a
:class:`numpy.random.SeedSequence` or an existing
:class:`numpy.random.Generator`; passing a generator continues its stream.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams, ScheduleBeyondTrajectory
from .transition import coeffs
from .types import ObservationSeries, RateParams, Trajectory

DEFAULT_TAU_STEP = 0.01
_MAX_BLOCK = 1 << 20


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def replicate_seed(seed: int, *indices: int) -> np.random.SeedSequence:
    """Seed for one replicate: the base seed mixed with replicate indices."""
    return np.random.SeedSequence([int(seed), *[int(i) for i in indices]])


def gillespie(p: RateParams, x0: int, t_max: float, seed) -> Trajectory:
    """Exact event-by-event simulation.

    The embedded jump chain of the linear process is a +/-1 random walk with
    up-probability ``lam / (lam + mu)``, and the holding time in state ``x``
    is exponential with rate ``(lam + mu) x``. Random numbers are drawn in
    blocks sized to the expected number of remaining events, which keeps the
    path exact while avoiding one generator call per event.
    """
    if int(x0) != x0 or x0 < 1:
        raise InvalidParams(f"x0 must be a positive integer, got {x0}")
    if not t_max > 0:
        raise InvalidParams(f"t_max must be positive, got {t_max}")
    rng = make_rng(seed)
    total = p.lam + p.mu
    p_birth = p.lam / total
    x, t = int(x0), 0.0
    time_chunks = [np.zeros(1)]
    size_chunks = [np.array([x], dtype=np.int64)]
    while x > 0:
        expected = total * x * (t_max - t)
        block = int(min(max(1.25 * expected + 6.0 * math.sqrt(expected) + 16, 16), _MAX_BLOCK))
        steps = np.where(rng.random(block) < p_birth, 1, -1)
        waits = rng.standard_exponential(block)
        path = x + np.cumsum(steps)
        hit = np.flatnonzero(path == 0)
        n_valid = hit[0] + 1 if hit.size else block
        prev = np.empty(n_valid)
        prev[0] = x
        prev[1:] = path[: n_valid - 1]
        event_t = t + np.cumsum(waits[:n_valid] / (total * prev))
        n_keep = int(np.searchsorted(event_t, t_max, side="right"))
        time_chunks.append(event_t[:n_keep])
        size_chunks.append(path[:n_keep])
        if n_keep < n_valid:
            break
        t, x = float(event_t[-1]), int(path[n_valid - 1])
    return Trajectory(np.concatenate(time_chunks), np.concatenate(size_chunks), "exact", t_max)


def tau_leap_paths(
    birth: Callable[[float], float],
    death: Callable[[float], float],
    x0,
    n_paths: int,
    t_max: float,
    step: float = DEFAULT_TAU_STEP,
    seed=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Tau-leaping for ``n_paths`` independent paths on a shared fixed grid.

    ``birth`` and ``death`` give per-capita rates as functions of time and
    are evaluated at each step midpoint, so time-varying rates are handled
    by the same loop. Returns ``(grid, sizes)`` with ``sizes`` of shape
    ``(len(grid), n_paths)``.
    """
    if not step > 0:
        raise InvalidParams(f"step must be positive, got {step}")
    if not t_max > 0:
        raise InvalidParams(f"t_max must be positive, got {t_max}")
    rng = make_rng(seed)
    n_steps = max(1, math.ceil(t_max / step - 1e-9))
    grid = np.arange(n_steps + 1) * step
    sizes = np.empty((n_steps + 1, n_paths), dtype=np.int64)
    x = np.broadcast_to(np.asarray(x0, dtype=np.int64), (n_paths,)).copy()
    if np.any(x < 0):
        raise InvalidParams("initial sizes must be nonnegative")
    sizes[0] = x
    for k in range(n_steps):
        mid = (k + 0.5) * step
        lam_h, mu_h = birth(mid) * step, death(mid) * step
        if lam_h < 0 or mu_h < 0:
            raise InvalidParams(f"negative rate at t={mid}")
        births = rng.poisson(lam_h * x) if lam_h > 0 else 0
        deaths = rng.poisson(mu_h * x) if mu_h > 0 else 0
        x = np.maximum(x + births - deaths, 0)
        sizes[k + 1] = x
    return grid, sizes


def tau_leap(p: RateParams, x0: int, t_max: float, step: float = DEFAULT_TAU_STEP, seed=None) -> Trajectory:
    """Fixed-step Poisson approximation of a single path."""
    if int(x0) != x0 or x0 < 1:
        raise InvalidParams(f"x0 must be a positive integer, got {x0}")
    grid, sizes = tau_leap_paths(lambda t: p.lam, lambda t: p.mu, x0, 1, t_max, step, seed)
    return Trajectory(grid, sizes[:, 0], "tau-leap", t_max)


def sample_schedule(n_points: int, shape: float, rate: float = 1.0, seed=None) -> np.ndarray:
    """Observation times starting at 0 with iid Gamma(shape, rate) gaps."""
    if n_points < 2:
        raise InvalidParams(f"n_points must be >= 2, got {n_points}")
    if not (shape > 0 and rate > 0):
        raise InvalidParams("gamma shape and rate must be positive")
    rng = make_rng(seed)
    gaps = rng.gamma(shape, 1.0 / rate, size=n_points - 1)
    times = np.concatenate(([0.0], np.cumsum(gaps)))
    # Small shapes put real mass on gaps below one ulp of the running time,
    # which would produce tied times; such gaps are redrawn.
    for _ in range(1000):
        tied = np.flatnonzero(np.diff(times) <= 0)
        if tied.size == 0:
            return times
        gaps[tied] = rng.gamma(shape, 1.0 / rate, size=tied.size)
        times = np.concatenate(([0.0], np.cumsum(gaps)))
    raise InvalidParams("could not draw strictly increasing times; gamma shape too small")


def step_values(event_times: np.ndarray, sizes: np.ndarray, times) -> np.ndarray:
    """Right-continuous step-function lookup: the last size at or before each time."""
    idx = np.searchsorted(event_times, np.asarray(times, dtype=np.float64), side="right") - 1
    if np.any(idx < 0):
        raise ScheduleBeyondTrajectory("requested time precedes the start of the path")
    return sizes[idx]


def observe(traj: Trajectory, times, series_id: str = "") -> ObservationSeries:
    times = np.asarray(times, dtype=np.float64)
    if times.size and times.max() > traj.t_max * (1 + 1e-12):
        raise ScheduleBeyondTrajectory(
            f"time {times.max():.6g} is beyond the simulated horizon {traj.t_max:.6g}"
        )
    counts = step_values(traj.event_times, traj.sizes, times)
    return ObservationSeries(times, counts, series_id)


def sample_transition(p: RateParams, x, t: float, seed) -> np.ndarray:
    """Exact draw of ``X(t)`` given ``X(0) = x`` (vectorized over ``x``).

    Each ancestor survives with probability ``1 - A(t)`` and a survivor's
    family is geometric on ``{1, 2, ...}`` with ratio ``B(t)``, so the total
    is ``S + NegBin(S, 1 - B)`` with ``S ~ Binomial(x, 1 - A)``.
    """
    rng = make_rng(seed)
    c = coeffs(p, t)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    survivors = rng.binomial(x, 1.0 - c.a)
    extra = np.zeros_like(survivors)
    alive = survivors > 0
    if np.any(alive) and c.b > 0:
        extra[alive] = rng.negative_binomial(survivors[alive], 1.0 - c.b)
    total = survivors + extra
    return total[0] if scalar else total


def sample_skeleton(p: RateParams, x0: int, times, seed, series_id: str = "") -> ObservationSeries:
    """Exact draw of a path observed only at ``times`` (no event-level simulation).

    Practical at population sizes where event-by-event simulation is not.
    """
    rng = make_rng(seed)
    times = np.asarray(times, dtype=np.float64)
    counts = np.empty(times.size, dtype=np.int64)
    counts[0] = x0
    for i in range(1, times.size):
        prev = counts[i - 1]
        counts[i] = sample_transition(p, prev, times[i] - times[i - 1], rng) if prev > 0 else 0
    return ObservationSeries(times, counts, series_id)


def mean_path(x0: float, growth: Callable[[int, float], float], times) -> np.ndarray:
    """Deterministic path ``X_{i+1} = X_i * growth(i, t_i)``; used for noiseless fixtures."""
    times = np.asarray(times, dtype=np.float64)
    out = np.empty(times.size)
    out[0] = x0
    for i, dt in enumerate(np.diff(times)):
        out[i + 1] = out[i] * growth(i, dt)
    return out


def exponential_series(x0: float, alpha: float, times, series_id: str = "", rounding: Optional[str] = None):
    """Noiseless series ``x0 * exp(alpha * (T - T_1))``, optionally rounded to integers."""
    times = np.asarray(times, dtype=np.float64)
    counts = x0 * np.exp(alpha * (times - times[0]))
    if rounding == "round":
        counts = np.round(counts)
    return ObservationSeries(times, counts, series_id)
