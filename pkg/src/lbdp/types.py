"""Domain types and the (lambda, mu) <-> (alpha, sigma2) reparameterization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CriticalProcess, InvalidParams, InvalidSeries

ESTIMATOR_METHODS = ("GW", "ApproxMLE", "GaussianMLE", "Saddlepoint", "Generalized")


@dataclass(frozen=True)
class RateParams:
    """Per-capita birth and death rates of a linear birth-death process."""

    lam: float
    mu: float

    def __post_init__(self):
        lam, mu = float(self.lam), float(self.mu)
        if not (math.isfinite(lam) and math.isfinite(mu)):
            raise InvalidParams(f"rates must be finite, got lam={lam}, mu={mu}")
        if lam < 0 or mu < 0:
            raise InvalidParams(f"rates must be nonnegative, got lam={lam}, mu={mu}")
        if lam + mu <= 0:
            raise InvalidParams("at least one rate must be positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def alpha(self) -> float:
        return self.lam - self.mu


@dataclass(frozen=True)
class GrowthParams:
    """Growth rate ``alpha = lam - mu`` and variance scale ``sigma2 = (lam + mu) / (lam - mu)``."""

    alpha: float
    sigma2: float


def rates_to_growth(p: RateParams) -> GrowthParams:
    if p.lam == p.mu:
        raise CriticalProcess("sigma2 is undefined for a critical process (lam == mu)")
    alpha = p.lam - p.mu
    return GrowthParams(alpha=alpha, sigma2=(p.lam + p.mu) / alpha)


def _rates(alpha: float, sigma2: float) -> tuple[float, float]:
    lam = alpha * (sigma2 + 1.0) / 2.0
    mu = alpha * (sigma2 - 1.0) / 2.0
    # exact boundary cases (|sigma2| == 1) can come out as -0.0 or -1e-17
    tol = 1e-12 * abs(lam)
    if -tol < mu < 0:
        mu = 0.0
    if -tol < lam < 0:
        lam = 0.0
    return lam, mu


def growth_to_rates(g: GrowthParams) -> RateParams:
    if g.alpha == 0:
        raise CriticalProcess("alpha == 0 does not determine the rates")
    lam, mu = _rates(g.alpha, g.sigma2)
    if lam < 0 or mu < 0:
        raise InvalidParams(f"(alpha={g.alpha}, sigma2={g.sigma2}) gives negative rates ({lam}, {mu})")
    return RateParams(lam, mu)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    """Counts of one population observed at strictly increasing times.

    Counts are held as float64 so that fractional pseudo-counts (e.g. from
    allele frequencies) pass through unchanged; integer counts are exact up
    to 2**53.
    """

    times: np.ndarray
    counts: np.ndarray
    series_id: str = ""

    def __post_init__(self):
        times = _frozen_array(self.times, np.float64)
        counts = _frozen_array(self.counts, np.float64)
        if times.ndim != 1 or counts.ndim != 1:
            raise InvalidSeries("times and counts must be one-dimensional")
        if times.shape != counts.shape:
            raise InvalidSeries(f"{times.size} times but {counts.size} counts")
        if times.size < 2:
            raise InvalidSeries("a series needs at least two observations")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(counts))):
            raise InvalidSeries("times and counts must be finite")
        if times[0] < 0:
            raise InvalidSeries("times must be nonnegative")
        if np.any(np.diff(times) <= 0):
            raise InvalidSeries("times must be strictly increasing")
        if np.any(counts < 0):
            raise InvalidSeries("counts must be nonnegative")
        if counts[0] <= 0:
            raise InvalidSeries("the first count must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "series_id", str(self.series_id))

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.times)

    def __len__(self) -> int:
        return self.times.size

    def scaled(self, c: float) -> "ObservationSeries":
        """Copy with every count multiplied by ``c``."""
        return ObservationSeries(self.times, self.counts * c, self.series_id)

    def __eq__(self, other):
        if not isinstance(other, ObservationSeries):
            return NotImplemented
        return (
            self.series_id == other.series_id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


SeriesLike = Union[ObservationSeries, Sequence[ObservationSeries]]


def as_series_list(series: SeriesLike) -> list[ObservationSeries]:
    if isinstance(series, ObservationSeries):
        return [series]
    out = list(series)
    if not out:
        raise InvalidSeries("no observation series given")
    for s in out:
        if not isinstance(s, ObservationSeries):
            raise TypeError(f"expected ObservationSeries, got {type(s).__name__}")
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A simulated path as a right-continuous step function.

    ``sizes[k]`` is the population from ``event_times[k]`` until the next
    entry. ``t_max`` is the simulated horizon; the path is defined on
    ``[event_times[0], t_max]``.
    """

    event_times: np.ndarray
    sizes: np.ndarray
    method: str
    t_max: float

    def __post_init__(self):
        times = _frozen_array(self.event_times, np.float64)
        sizes = _frozen_array(self.sizes, np.int64)
        if times.shape != sizes.shape or times.ndim != 1 or times.size == 0:
            raise InvalidSeries("event_times and sizes must be equal-length 1-D arrays")
        if self.method not in ("exact", "tau-leap"):
            raise InvalidSeries(f"unknown simulation method {self.method!r}")
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "t_max", float(self.t_max))

    @property
    def extinct(self) -> bool:
        return bool(self.sizes[-1] == 0)

    def __len__(self) -> int:
        return self.sizes.size


@dataclass(frozen=True)
class EstimateResult:
    """Output of every estimator.

    Undefined quantities are ``None``. ``theta`` and ``residual_norm`` are
    only filled by the time-varying-rate estimator.
    """

    alpha_hat: Optional[float]
    sigma2_hat: Optional[float]
    lambda_hat: Optional[float]
    mu_hat: Optional[float]
    method: str
    converged: bool
    iterations: int
    runtime_seconds: float
    theta: Optional[tuple] = None
    residual_norm: Optional[float] = None
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.method not in ESTIMATOR_METHODS:
            raise ValueError(f"unknown estimator method {self.method!r}")
        if self.converged and self.theta is None:
            if self.alpha_hat is None or not math.isfinite(self.alpha_hat):
                raise ValueError("a converged fit must carry a finite alpha_hat")


def make_result(
    method: str,
    alpha: Optional[float],
    sigma2: Optional[float],
    *,
    converged: bool,
    iterations: int,
    runtime: float,
    warnings: Sequence[str] = (),
    rates: Optional[tuple] = None,
) -> EstimateResult:
    """Build an :class:`EstimateResult`, back-converting to rates when both are valid."""
    lam = mu = None
    if rates is not None:
        lam, mu = rates
    elif alpha is not None and sigma2 is not None and alpha != 0:
        lam, mu = _rates(alpha, sigma2)
        if not (lam >= 0 and mu >= 0 and lam + mu > 0 and math.isfinite(lam) and math.isfinite(mu)):
            lam = mu = None
    return EstimateResult(
        alpha_hat=None if alpha is None else float(alpha),
        sigma2_hat=None if sigma2 is None else float(sigma2),
        lambda_hat=lam,
        mu_hat=mu,
        method=method,
        converged=bool(converged),
        iterations=int(iterations),
        runtime_seconds=float(runtime),
        warnings=tuple(warnings),
    )
