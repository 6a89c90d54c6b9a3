"""Transition law of the linear birth-death process.

Three equivalent closed forms of ``P(X(t) = m | X(0) = n)`` are provided,
all evaluated in log space with log-gamma binomials so that counts far
beyond factorial range are safe, plus the moment-matched Gaussian density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DegenerateVariance, DomainError, InvalidParams, OverflowGuard
from .types import GrowthParams, RateParams

# below this |alpha * t| the (e^x - 1) / x factor is replaced by its Taylor series
SERIES_THRESHOLD = 1e-8
# 1 - A - B values in (-CLAMP, 0) are rounding noise
CLAMP = 1e-14


@dataclass(frozen=True)
class TransitionCoeffs:
    """Coefficients ``A(t)``, ``B(t)`` and ``c = 1 - A(t) - B(t)``.

    ``A`` is the probability that a single ancestor leaves no descendants at
    time ``t``; conditioned on survival its progeny is geometric on
    ``{1, 2, ...}`` with ratio ``B``. ``c`` is computed directly rather than
    by subtraction.
    """

    a: float
    b: float
    t: float
    c: float


def _inv_growth_factor(alpha: float, t: float) -> float:
    """Return ``alpha / (exp(alpha t) - 1)``, finite at ``alpha = 0``."""
    x = alpha * t
    if abs(x) < SERIES_THRESHOLD:
        return 1.0 / (t * (1.0 + x / 2.0 + x * x / 6.0))
    em1 = math.expm1(x) if x < 700 else math.inf
    return alpha / em1


def coeffs(p: RateParams, t: float) -> TransitionCoeffs:
    if not t > 0:
        raise InvalidParams(f"t must be positive, got {t}")
    lam, mu = p.lam, p.mu
    # A = mu / (lam + k), B = lam / (lam + k) with k = alpha / (e^{alpha t} - 1);
    # this covers mu = 0, lam = 0 and lam = mu without special cases.
    k = _inv_growth_factor(lam - mu, t)
    denom = lam + k
    a = mu / denom
    b = lam / denom
    c = (k - mu) / denom
    if -CLAMP < c < 0:
        c = 0.0
    return TransitionCoeffs(a=a, b=b, t=float(t), c=c)


def _logsumexp(terms: np.ndarray) -> float:
    # scipy.special.logsumexp costs more in dispatch than the sum itself on these short arrays
    top = terms.max()
    if not np.isfinite(top):
        return float(top)
    return float(top + np.log(np.exp(terms - top).sum()))


def _log_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _check_nm(n: int, m: int, m_min: int = 0) -> tuple[int, int]:
    if int(n) != n or int(m) != m:
        raise InvalidParams("n and m must be integers")
    n, m = int(n), int(m)
    if n < 1:
        raise InvalidParams(f"n must be >= 1, got {n}")
    if m < m_min:
        raise InvalidParams(f"m must be >= {m_min}, got {m}")
    return n, m


def log_extinction(n: int, c: TransitionCoeffs) -> float:
    """``log P(X(t) = 0 | X(0) = n) = n log A``."""
    return float(xlogy(n, c.a))


def log_transition_keiding(n: int, m: int, c: TransitionCoeffs) -> float:
    """Log transition probability from the discrete-skeleton sum.

    Terms run over ``j = 0..min(n, m)`` and carry ``(1 - A - B)**j``, so the
    sum is only free of cancellation when ``1 - A - B >= 0``; otherwise
    :class:`DomainError` is raised.
    """
    n, m = _check_nm(n, m)
    if m == 0:
        return log_extinction(n, c)
    if c.c < 0:
        raise DomainError(f"1 - A - B = {c.c:.3g} < 0; use log_transition_alternative")
    j = np.arange(min(n, m) + 1, dtype=np.float64)
    terms = (
        _log_binom(n, j)
        + _log_binom(n + m - j - 1, n - 1)
        + xlogy(n - j, c.a)
        + xlogy(m - j, c.b)
        + xlogy(j, c.c)
    )
    return _logsumexp((terms))


def log_transition_alternative(n: int, m: int, c: TransitionCoeffs) -> float:
    """Log transition probability as a sum over surviving ancestors.

    Term ``j`` is the probability that exactly ``j`` of the ``n`` ancestors
    survive and their geometric families total ``m``; every term is
    nonnegative.
    """
    n, m = _check_nm(n, m)
    if m == 0:
        return log_extinction(n, c)
    j = np.arange(1, min(n, m) + 1, dtype=np.float64)
    log_surv = math.log1p(-c.a) + math.log1p(-c.b)
    terms = (
        _log_binom(m - 1, j - 1)
        + _log_binom(n, j)
        + xlogy(n - j, c.a)
        + xlogy(m - j, c.b)
        + j * log_surv
    )
    return _logsumexp((terms))


def hyp2f1_argument(c: TransitionCoeffs) -> float:
    """Argument of the terminating 2F1 series: ``1/A + 1/B - 1/(A B)``."""
    return -c.c / (c.a * c.b)


def log_hyp2f1_terminating(m: int, n: int, z: float) -> float:
    """``log 2F1(-m, -n; 1 - n - m; z)`` for integers ``m, n >= 1`` and ``z <= 0``.

    With ``z <= 0`` all terms share one sign, so the series is summed in log
    space. Positive ``z`` gives an alternating series and raises
    :class:`OverflowGuard`.
    """
    if z > 0:
        raise OverflowGuard("alternating 2F1 series (z > 0) would cancel")
    k = np.arange(min(n, m) + 1, dtype=np.float64)
    if z == 0:
        return 0.0
    log_terms = (
        (gammaln(m + 1.0) - gammaln(m - k + 1.0))
        + (gammaln(n + 1.0) - gammaln(n - k + 1.0))
        - (gammaln(n + m) - gammaln(n + m - k))
        - gammaln(k + 1.0)
        + k * math.log(-z)
    )
    if not np.all(np.isfinite(log_terms)):
        raise OverflowGuard("2F1 terms left the representable range")
    return _logsumexp((log_terms))


def log_transition_2f1(n: int, m: int, c: TransitionCoeffs, fallback: bool = True) -> float:
    """Log transition probability through a terminating hypergeometric series.

    When ``A`` or ``B`` is zero the argument is infinite, and when
    ``1 - A - B < 0`` the series alternates; both raise :class:`OverflowGuard`,
    which is answered with :func:`log_transition_alternative` unless
    ``fallback`` is False.
    """
    n, m = _check_nm(n, m)
    if m == 0:
        return log_extinction(n, c)
    try:
        if c.a <= 0 or c.b <= 0:
            raise OverflowGuard("A or B is zero; the 2F1 argument is infinite")
        z = hyp2f1_argument(c)
        if not math.isfinite(z):
            raise OverflowGuard("2F1 argument is not finite")
        log_f = log_hyp2f1_terminating(m, n, z)
    except OverflowGuard:
        if not fallback:
            raise
        return log_transition_alternative(n, m, c)
    log_prefactor = n * math.log(c.a) + m * math.log(c.b) + float(_log_binom(n + m - 1, m))
    return log_prefactor + log_f


def log_transition(n: int, m: int, c: TransitionCoeffs) -> float:
    """Default exact kernel (the all-positive surviving-ancestor sum)."""
    return log_transition_alternative(n, m, c)


def log_pmf_row(n: int, m_values, c: TransitionCoeffs) -> np.ndarray:
    """Exact log-probabilities for an array of target sizes."""
    return np.array([log_transition(n, int(m), c) for m in np.asarray(m_values)])


def gaussian_moments(x: float, g: GrowthParams, t: float) -> tuple[float, float]:
    """Mean and variance of the moment-matched Gaussian transition."""
    em1 = math.expm1(g.alpha * t)
    e = em1 + 1.0
    return x * e, g.sigma2 * x * e * em1


def gaussian_logpdf(x_next: float, x: float, g: GrowthParams, t: float) -> float:
    if not x > 0:
        raise InvalidParams(f"x must be positive, got {x}")
    if not t > 0:
        raise InvalidParams(f"t must be positive, got {t}")
    if g.alpha == 0:
        raise InvalidParams("alpha must be nonzero")
    mean, var = gaussian_moments(x, g, t)
    if not var > 0:
        raise DegenerateVariance(f"transition variance {var:.3g} is not positive")
    resid = x_next - mean
    return -0.5 * math.log(2.0 * math.pi * var) - resid * resid / (2.0 * var)
