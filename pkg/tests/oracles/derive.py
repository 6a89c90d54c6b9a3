"""Independent high-precision derivation of the constants frozen in the tests.

Run ``python tests/oracles/derive.py`` to reprint them. Nothing here imports
the package: every value comes from mpmath at 50 digits by a different route
than the library code (series expansion instead of closed forms, bisection
instead of Newton, direct numerical differentiation instead of profiling).
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50


def coeffs(lam, mu, t):
    lam, mu, t = mp.mpf(lam), mp.mpf(mu), mp.mpf(t)
    if lam == mu:
        a = lam * t / (1 + lam * t)
        return a, a
    e = mp.exp((lam - mu) * t)
    a = mu * (e - 1) / (lam * e - mu)
    b = lam * (e - 1) / (lam * e - mu)
    return a, b


def transition_prob(n, m, lam, mu, t):
    """Coefficient of z^m in f(z)^n, f the one-ancestor generating function."""
    a, b = coeffs(lam, mu, t)
    f = lambda z: ((a + (1 - a - b) * z) / (1 - b * z)) ** n
    return mp.taylor(f, 0, m)[m]


def h(alpha, t, x, y):
    return sum(ti / mp.expm1(alpha * ti) * (yi - xi * mp.exp(alpha * ti)) for ti, xi, yi in zip(t, x, y))


def bisect(f, lo, hi, tol=mp.mpf("1e-40")):
    flo = f(lo)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def gaussian_loglik(alpha, s2, t, x, y):
    out = 0
    for ti, xi, yi in zip(t, x, y):
        e = mp.exp(alpha * ti)
        v = s2 * xi * e * (e - 1)
        out += -mp.log(2 * mp.pi * v) / 2 - (yi - xi * e) ** 2 / (2 * v)
    return out


def saddle_logdensity(x, y, lam, mu, t):
    a, b = coeffs(lam, mu, t)
    f = lambda z: (a + (1 - a - b) * z) / (1 - b * z)
    K = lambda s: x * mp.log(f(mp.exp(s)))
    s_hat = mp.findroot(lambda s: mp.diff(K, s) - y, 0)
    k2 = mp.diff(K, s_hat, 2)
    return K(s_hat) - s_hat * y - mp.log(2 * mp.pi * k2) / 2


def main():
    print("transition probabilities P(n -> m)")
    for lam, mu, t, n, m in [
        (0.2, 0.1, 1.0, 5, 7),
        (0.6, 0.4, 2.5, 10, 3),
        (2.0, 1.0, 0.3, 3, 0),
        (1.0, 1.0, 1.0, 4, 4),
        (0.5, 0.0, 1.0, 2, 5),
        (0.0, 0.7, 2.0, 6, 2),
    ]:
        print(f"  {(lam, mu, t, n, m)}: log P = {mp.nstr(mp.log(transition_prob(n, m, lam, mu, t)), 17)}")

    T = [mp.mpf(0), mp.mpf("0.7"), mp.mpf("1.9"), mp.mpf("3.2")]
    X = [mp.nint(1000 * mp.exp(mp.mpf("0.1") * ti)) for ti in T]
    t = [T[i + 1] - T[i] for i in range(3)]
    x, y = X[:-1], X[1:]
    print("exponential fixture counts", [int(v) for v in X])
    root = bisect(lambda a: h(a, t, x, y), mp.mpf("0.01"), mp.mpf("1"))
    print("  root of h:", mp.nstr(root, 17))
    e = [mp.exp(root * ti) for ti in t]
    s2 = sum((yi - xi * ei) ** 2 / (xi * ei * (ei - 1)) for xi, yi, ei in zip(x, y, e)) / 3
    print("  profile sigma2 at the root:", mp.nstr(s2, 17))

    # joint Gaussian maximum likelihood: stationary point of the full gradient
    grad = lambda a, s: (
        mp.diff(lambda u: gaussian_loglik(u, s, t, x, y), a),
        mp.diff(lambda u: gaussian_loglik(a, u, t, x, y), s),
    )
    a_hat, s_hat = mp.findroot(lambda a, s: grad(a, s), (root, s2))
    print("  joint Gaussian MLE alpha, sigma2:", mp.nstr(a_hat, 17), mp.nstr(s_hat, 17))

    e1 = mp.exp(mp.mpf("0.1"))
    lit = 100 * e1 / (e1 - 1) * (115 / e1 - 100) ** 2
    print("literal sigma2 term (100, 115, 0.1, 1):", mp.nstr(lit, 17))

    print("saddlepoint log densities")
    for args in [(50, 60, 0.2, 0.1, 1.0), (10, 3, 0.6, 0.4, 2.0), (200, 260, 2.0, 1.0, 0.3)]:
        print(f"  {args}: {mp.nstr(saddle_logdensity(*args), 17)}")

    # time-varying rates: birth a exp(-b s), constant death mu
    a, b, mu = mp.mpf("0.3"), mp.mpf("0.2"), mp.mpf("0.05")
    s0, s1 = mp.mpf("0.5"), mp.mpf("2.0")
    net = lambda s: a * mp.exp(-b * s) - mu
    rho = lambda u: mp.quad(net, [s0, u])
    mean = mp.exp(rho(s1))
    var_int = mp.quad(lambda u: (a * mp.exp(-b * u) + mu) * mp.exp(-rho(u)), [s0, s1])
    print("exp-decay moments on [0.5, 2]: mean", mp.nstr(mean, 17), "var_integral", mp.nstr(var_int, 17))
    grad_a = mean * mp.quad(lambda s: mp.exp(-b * s), [s0, s1])
    grad_b = mean * mp.quad(lambda s: -a * s * mp.exp(-b * s), [s0, s1])
    print("  d mean / d(a, b):", mp.nstr(grad_a, 17), mp.nstr(grad_b, 17))


if __name__ == "__main__":
    main()
