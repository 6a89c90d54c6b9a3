"""Growth estimation when birth and death rates vary with time.

With ``rho_i(u) = int_{T_i}^u (lam - mu)(s) ds`` the transition over
``[T_i, T_{i+1}]`` has mean multiplier ``m_i = exp(rho_i(T_{i+1}))`` and
per-ancestor variance ``m_i^2 * V_i`` where

    V_i = int_{T_i}^{T_{i+1}} (lam + mu)(u) exp(-rho_i(u)) du.

The estimator solves ``sum_i dm_i/dtheta / var_i * (X_{i+1} - X_i m_i) = 0``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParams, NonConvergence, OutOfBounds
from .estimate import DEFAULT_CONFIG, SolverConfig
from .quadrature import DEFAULT_RTOL, integrate
from .types import EstimateResult, ObservationSeries, SeriesLike, as_series_list

FD_STEP = 1e-6

RateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RateFunctionSpec:
    """A parametric family of time-varying per-capita rates.

    ``birth(s, theta)`` and ``death(s, theta)`` must accept an array of
    times of any shape. ``net_rate_grad(s, theta)``, if given, returns
    ``d(lam - mu)/dtheta`` with shape ``(theta_dim,) + s.shape``; otherwise
    gradients are taken by central finite differences. ``growth``, if given,
    maps ``theta`` to a constant growth rate (constant-rate families only).
    """

    birth: RateFn
    death: RateFn
    theta_dim: int
    theta_bounds: tuple
    net_rate_grad: Optional[Callable] = None
    growth: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.theta_dim < 1:
            raise InvalidParams("theta_dim must be >= 1")
        if len(self.theta_bounds) != self.theta_dim:
            raise InvalidParams("one (low, high) bound pair is needed per theta component")

    def in_bounds(self, theta) -> bool:
        return all(lo <= v <= hi for v, (lo, hi) in zip(theta, self.theta_bounds))

    def check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != self.theta_dim:
            raise InvalidParams(f"theta has {theta.size} components, expected {self.theta_dim}")
        if not self.in_bounds(theta):
            raise OutOfBounds(f"theta={theta.tolist()} is outside {self.theta_bounds}")
        return theta


def constant_rate_spec(death_rate: float) -> RateFunctionSpec:
    """Constant rates with ``theta = (lam,)`` and a fixed death rate."""
    mu = float(death_rate)
    return RateFunctionSpec(
        birth=lambda s, th: np.full(np.shape(s), th[0]),
        death=lambda s, th: np.full(np.shape(s), mu),
        theta_dim=1,
        theta_bounds=((0.0, math.inf),),
        net_rate_grad=lambda s, th: np.ones((1,) + np.shape(s)),
        growth=lambda th: th[0] - mu,
        name="constant",
    )


def linear_rate_spec(death_rate: float) -> RateFunctionSpec:
    """``lam(t) = theta_1 + theta_2 t`` with a fixed death rate."""
    mu = float(death_rate)
    return RateFunctionSpec(
        birth=lambda s, th: th[0] + th[1] * s,
        death=lambda s, th: np.full(np.shape(s), mu),
        theta_dim=2,
        theta_bounds=((0.0, math.inf), (-math.inf, math.inf)),
        net_rate_grad=lambda s, th: np.stack([np.ones(np.shape(s)), np.asarray(s, dtype=float)]),
        name="linear",
    )


def exp_decay_spec(death_rate: float = 0.0) -> RateFunctionSpec:
    """``lam(t) = a exp(-b t)`` with a fixed death rate; ``theta = (a, b)``."""
    mu = float(death_rate)
    return RateFunctionSpec(
        birth=lambda s, th: th[0] * np.exp(-th[1] * s),
        death=lambda s, th: np.full(np.shape(s), mu),
        theta_dim=2,
        theta_bounds=((0.0, math.inf), (-math.inf, math.inf)),
        net_rate_grad=lambda s, th: np.stack([np.exp(-th[1] * s), -th[0] * s * np.exp(-th[1] * s)]),
        name="exp-decay",
    )


@dataclass(frozen=True)
class MomentFunctions:
    """Per-interval transition moments for one schedule at one ``theta``.

    ``var_integral`` is ``V_i`` as defined in the module docstring and
    ``sigma2 = mean**2 * var_integral`` is the per-ancestor transition
    variance.
    """

    mean: np.ndarray
    var_integral: np.ndarray
    sigma2: np.ndarray
    log_mean: np.ndarray
    rtol: float


def _net(spec: RateFunctionSpec, theta):
    def f(s):
        lam, mu = spec.birth(s, theta), spec.death(s, theta)
        if np.any(lam < 0) or np.any(mu < 0):
            raise InvalidParams(f"negative rate at theta={np.asarray(theta).tolist()}")
        return lam - mu

    return f


def log_mean_multipliers(spec: RateFunctionSpec, theta, times, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    times = np.asarray(times, dtype=np.float64)
    return integrate(_net(spec, theta), times[:-1], times[1:], rtol=rtol)


def moment_functions(spec: RateFunctionSpec, theta, times, rtol: float = DEFAULT_RTOL) -> MomentFunctions:
    """Mean multipliers and variances for every interval of ``times``.

    The inner rate integral is evaluated on the outer quadrature nodes in
    the same vectorized call, so the nested integral costs one outer
    refinement loop.
    """
    theta = spec.check(theta)
    times = np.asarray(times, dtype=np.float64)
    starts, ends = times[:-1], times[1:]
    net = _net(spec, theta)
    log_mean = integrate(net, starts, ends, rtol=rtol)

    def outer(u):
        rho = integrate(net, np.broadcast_to(starts[:, None], u.shape), u, rtol=rtol)
        return (spec.birth(u, theta) + spec.death(u, theta)) * np.exp(-rho)

    var_integral = integrate(outer, starts, ends, rtol=rtol)
    mean = np.exp(log_mean)
    return MomentFunctions(mean, var_integral, mean * mean * var_integral, log_mean, rtol)


def mean_gradient(spec: RateFunctionSpec, theta, times, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """``d m_i / d theta`` with shape ``(theta_dim, n_intervals)``.

    Uses ``dm_i/dtheta = m_i * int d(lam - mu)/dtheta ds`` when ``spec``
    supplies the rate gradient, else central differences of ``m_i`` with
    step ``1e-6 * max(|theta_k|, 1)``.
    """
    theta = spec.check(theta)
    times = np.asarray(times, dtype=np.float64)
    starts, ends = times[:-1], times[1:]
    mean = np.exp(log_mean_multipliers(spec, theta, times, rtol))
    if spec.net_rate_grad is not None:
        out = np.empty((spec.theta_dim, starts.size))
        for k in range(spec.theta_dim):
            out[k] = mean * integrate(lambda s: spec.net_rate_grad(s, theta)[k], starts, ends, rtol=rtol)
        return out
    return _fd_mean_gradient(spec, theta, times, rtol)


def _fd_mean_gradient(spec, theta, times, rtol):
    out = np.empty((spec.theta_dim, times.size - 1))
    for k in range(spec.theta_dim):
        h = FD_STEP * max(abs(theta[k]), 1.0)
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        m_up = np.exp(log_mean_multipliers(spec, up, times, rtol))
        m_down = np.exp(log_mean_multipliers(spec, down, times, rtol))
        out[k] = (m_up - m_down) / (2.0 * h)
    return out


def _group_by_schedule(items: Sequence[ObservationSeries]):
    groups: dict = {}
    for s in items:
        groups.setdefault(s.times.tobytes(), []).append(s)
    return [(g[0].times, g) for g in groups.values()]


def estimating_function(spec: RateFunctionSpec, theta, series: SeriesLike, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Vector ``sum_i dm_i/dtheta / var_i * (X_{i+1} - X_i m_i)`` pooled over series.

    Intervals starting from zero are skipped (their variance weight is undefined).
    """
    theta = spec.check(theta)
    total = np.zeros(spec.theta_dim)
    for times, group in _group_by_schedule(as_series_list(series)):
        mom = moment_functions(spec, theta, times, rtol)
        weight = mean_gradient(spec, theta, times, rtol) / mom.sigma2
        for s in group:
            x, y = s.counts[:-1], s.counts[1:]
            total += weight @ np.where(x > 0, y - x * mom.mean, 0.0)
    return total


def _jacobian(fun, theta, spec, r0):
    jac = np.empty((theta.size, theta.size))
    for k in range(theta.size):
        h = FD_STEP * max(abs(theta[k]), 1.0)
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        if spec.in_bounds(up) and spec.in_bounds(down):
            jac[:, k] = (fun(up) - fun(down)) / (2.0 * h)
        elif spec.in_bounds(up):
            jac[:, k] = (fun(up) - r0) / h
        else:
            jac[:, k] = (r0 - fun(down)) / h
    return jac


def generalized_estimate(
    spec: RateFunctionSpec,
    series: SeriesLike,
    theta_init,
    cfg: SolverConfig = DEFAULT_CONFIG,
    rtol: float = DEFAULT_RTOL,
) -> EstimateResult:
    """Root of the time-varying estimating equation reached by damped Newton from ``theta_init``.

    The Jacobian is taken by central differences. Each Newton step is halved
    until the iterate is inside the bounds and the residual norm decreases.
    Several roots can exist; the one found from ``theta_init`` is returned
    together with its residual norm.

    Raises:
        OutOfBounds: if no halving of a step keeps the iterate inside the bounds.
        NonConvergence: if the iteration limit is reached.
    """
    start = time.perf_counter()
    items = as_series_list(series)
    theta = spec.check(theta_init).copy()

    def fun(th):
        return estimating_function(spec, th, items, rtol)

    r = fun(theta)
    norm = float(np.linalg.norm(r))
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        jac = _jacobian(fun, theta, spec, r)
        try:
            step = -np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(jac, r, rcond=None)[0]
        scale = 1.0 + float(np.linalg.norm(theta))
        accepted = False
        saw_inside = False
        damp = 1.0
        for _ in range(40):
            cand = theta + damp * step
            if spec.in_bounds(cand):
                saw_inside = True
                r_new = fun(cand)
                n_new = float(np.linalg.norm(r_new))
                if n_new < norm or n_new == 0:
                    accepted = True
                    break
            damp *= 0.5
        if not saw_inside:
            raise OutOfBounds(f"Newton step from theta={theta.tolist()} leaves {spec.theta_bounds}")
        if not accepted:
            # residual cannot be reduced further: quadrature noise floor
            converged = float(np.linalg.norm(step)) < math.sqrt(cfg.root_tol) * scale
            break
        theta, r, norm = cand, r_new, n_new
        if float(np.linalg.norm(damp * step)) < cfg.root_tol * scale or norm == 0:
            converged = True
            break
    else:
        raise NonConvergence(f"no root after {cfg.max_iter} Newton iterations")

    warnings = () if converged else ("residual stalled before the step tolerance was met",)
    alpha = spec.growth(theta) if spec.growth is not None else None
    return EstimateResult(
        alpha_hat=None if alpha is None else float(alpha),
        sigma2_hat=None,
        lambda_hat=None,
        mu_hat=None,
        method="Generalized",
        converged=converged,
        iterations=it,
        runtime_seconds=time.perf_counter() - start,
        theta=tuple(float(v) for v in theta),
        residual_norm=norm,
        warnings=warnings,
    )


def _weights(spec, theta, times, rtol):
    mom = moment_functions(spec, theta, times, rtol)
    return mom, mean_gradient(spec, theta, times, rtol) / mom.sigma2


def g_generalized(theta, theta0, spec: RateFunctionSpec, series: SeriesLike, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Estimating function at ``theta`` normalized componentwise by its large-population scale at ``theta0``.

    The normalizer for component ``k`` is
    ``X_1 * sum_i w_ik(theta0) * prod_{j <= i} m_j(theta0)`` where ``w`` is the
    estimating-equation weight; sums are pooled over series.
    """
    items = as_series_list(series)
    num = np.zeros(spec.theta_dim)
    den = np.zeros(spec.theta_dim)
    for times, group in _group_by_schedule(items):
        mom, w = _weights(spec, theta, times, rtol)
        mom0, w0 = _weights(spec, theta0, times, rtol)
        scale = w0 @ np.cumprod(mom0.mean)
        for s in group:
            x, y = s.counts[:-1], s.counts[1:]
            num += w @ np.where(x > 0, y - x * mom.mean, 0.0)
            den += s.counts[0] * scale
    return num / den


def g_star_generalized(theta, theta0, spec: RateFunctionSpec, times, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Deterministic limit of :func:`g_generalized` for one schedule; zero at ``theta0``."""
    mom, w = _weights(spec, theta, times, rtol)
    mom0, w0 = _weights(spec, theta0, times, rtol)
    before = np.concatenate(([1.0], np.cumprod(mom0.mean)[:-1]))
    num = w @ ((mom0.mean - mom.mean) * before)
    return num / (w0 @ np.cumprod(mom0.mean))
