from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbdp.errors import InvalidParams, OutOfBounds
from lbdp.estimate import approx_mle, g_star
from lbdp.inhomogeneous import (
    RateFunctionSpec,
    _fd_mean_gradient,
    constant_rate_spec,
    estimating_function,
    exp_decay_spec,
    g_generalized,
    g_star_generalized,
    generalized_estimate,
    linear_rate_spec,
    mean_gradient,
    moment_functions,
)
from lbdp.simulate import sample_skeleton, tau_leap_paths
from lbdp.types import ObservationSeries, RateParams

# exp-decay birth 0.3 exp(-0.2 s), death 0.05, on [0.5, 2]; from tests/oracles/derive.py
DECAY_MEAN = 1.3188709873557706
DECAY_VAR_INTEGRAL = 0.37166243907154633
DECAY_GRAD = (1.5464907898107148, -0.56256206602905362)


def _mean_path(spec, theta, times, x1):
    mom = moment_functions(spec, theta, times)
    return ObservationSeries(times, x1 * np.concatenate(([1.0], np.cumprod(mom.mean))))


class TestMoments:
    def test_exp_decay_oracle(self):
        mom = moment_functions(exp_decay_spec(0.05), (0.3, 0.2), [0.5, 2.0])
        assert mom.mean[0] == pytest.approx(DECAY_MEAN, rel=1e-9)
        assert mom.var_integral[0] == pytest.approx(DECAY_VAR_INTEGRAL, rel=1e-8)
        assert mom.sigma2[0] == pytest.approx(DECAY_MEAN**2 * DECAY_VAR_INTEGRAL, rel=1e-8)

    def test_exp_decay_gradient_oracle(self):
        grad = mean_gradient(exp_decay_spec(0.05), (0.3, 0.2), [0.5, 2.0])
        np.testing.assert_allclose(grad[:, 0], DECAY_GRAD, rtol=1e-9)

    @pytest.mark.parametrize("lam, mu", [(0.3, 0.1), (0.1, 0.4), (1.2, 1.0)])
    def test_constant_rates(self, lam, mu):
        times = np.array([0.0, 0.3, 1.1, 2.5, 4.0])
        t = np.diff(times)
        a = lam - mu
        mom = moment_functions(constant_rate_spec(mu), (lam,), times)
        np.testing.assert_allclose(mom.mean, np.exp(a * t), rtol=1e-9)
        np.testing.assert_allclose(mom.var_integral, (lam + mu) / a * (-np.expm1(-a * t)), rtol=1e-8)
        # per-ancestor variance of the constant-rate process
        s2 = (lam + mu) / a
        np.testing.assert_allclose(mom.sigma2, s2 * np.exp(a * t) * np.expm1(a * t), rtol=1e-8)

    def test_balanced_rates(self):
        spec = RateFunctionSpec(
            birth=lambda s, th: th[0] * (1 + np.sin(s)),
            death=lambda s, th: th[0] * (1 + np.sin(s)),
            theta_dim=1,
            theta_bounds=((0, 10),),
        )
        mom = moment_functions(spec, (0.7,), [0, 1, 3.5])
        np.testing.assert_allclose(mom.mean, 1.0, rtol=1e-12)

    def test_multiplicative(self):
        spec = exp_decay_spec(0.05)
        split = moment_functions(spec, (0.4, 0.3), [0.2, 1.4, 3.0]).mean
        whole = moment_functions(spec, (0.4, 0.3), [0.2, 3.0]).mean
        assert whole[0] == pytest.approx(split[0] * split[1], rel=1e-9)

    @pytest.mark.parametrize("theta", [(0.3, 0.2), (1.0, -0.1), (0.05, 2.0)])
    def test_analytic_gradient_matches_fd(self, theta):
        spec = exp_decay_spec(0.1)
        times = np.array([0.0, 0.5, 1.7, 3.0])
        analytic = mean_gradient(spec, theta, times)
        fd = _fd_mean_gradient(spec, np.asarray(theta, dtype=float), times, 1e-12)
        np.testing.assert_allclose(analytic, fd, rtol=1e-5, atol=1e-10)

    def test_fd_used_without_gradient(self):
        spec = exp_decay_spec(0.1)
        bare = RateFunctionSpec(spec.birth, spec.death, 2, spec.theta_bounds)
        times = [0.0, 1.0, 2.5]
        np.testing.assert_allclose(mean_gradient(bare, (0.3, 0.2), times), mean_gradient(spec, (0.3, 0.2), times), rtol=1e-5)

    def test_bounds_and_rates_checked(self):
        spec = exp_decay_spec(0.1)
        with pytest.raises(OutOfBounds):
            moment_functions(spec, (-0.1, 0.2), [0, 1])
        with pytest.raises(InvalidParams):
            moment_functions(spec, (0.1, 0.2, 0.3), [0, 1])
        neg = linear_rate_spec(0.1)
        with pytest.raises(InvalidParams):
            moment_functions(neg, (0.1, -1.0), [0, 2])


class TestEstimator:
    def test_constant_rate_matches_approx(self):
        rng = np.random.default_rng(3)
        times = np.concatenate([[0.0], np.cumsum(rng.gamma(1.0, 1.0, 9))])
        series = [sample_skeleton(RateParams(0.2, 0.1), 1000, times, rng) for _ in range(5)]
        ref = approx_mle(series).alpha_hat
        res = generalized_estimate(constant_rate_spec(0.1), series, (0.25,))
        assert res.converged
        assert res.alpha_hat == pytest.approx(ref, abs=1e-6)
        assert res.theta[0] - 0.1 == pytest.approx(ref, abs=1e-6)

    def test_residual_zero_on_mean_path(self):
        spec = exp_decay_spec(0.05)
        times = np.array([0.0, 0.6, 1.5, 2.2, 4.0])
        s = _mean_path(spec, (0.3, 0.2), times, 1e5)
        r = estimating_function(spec, (0.3, 0.2), s)
        scale = np.abs(mean_gradient(spec, (0.3, 0.2), times)).sum() / moment_functions(spec, (0.3, 0.2), times).sigma2.min()
        assert np.all(np.abs(r) < 1e-8 * scale * 1e5)

    def test_mean_path_root(self):
        spec = exp_decay_spec(0.05)
        times = np.array([0.0, 0.6, 1.5, 2.2, 4.0, 5.5])
        s = _mean_path(spec, (0.3, 0.2), times, 1e4)
        res = generalized_estimate(spec, s, (0.25, 0.1))
        np.testing.assert_allclose(res.theta, (0.3, 0.2), rtol=1e-6)
        assert res.alpha_hat is None and res.method == "Generalized"

    def test_linear_model_recovery(self):
        theta0, mu = (0.4, -0.03), 0.1
        times = np.arange(0.0, 9.0)
        grid, sizes = tau_leap_paths(
            lambda s: theta0[0] + theta0[1] * s, lambda s: mu, 100_000, 5, times[-1], 0.01, seed=11
        )
        idx = np.rint(times / 0.01).astype(int)
        series = [ObservationSeries(times, sizes[idx, k]) for k in range(sizes.shape[1])]
        res = generalized_estimate(linear_rate_spec(mu), series, (0.3, 0.0))
        assert res.converged
        np.testing.assert_allclose(res.theta, theta0, rtol=0.05)

    def test_leaving_bounds(self):
        spec = RateFunctionSpec(
            birth=lambda s, th: np.full(np.shape(s), th[0]),
            death=lambda s, th: np.full(np.shape(s), 0.5),
            theta_dim=1,
            theta_bounds=((0.6, 0.61),),
        )
        s = ObservationSeries([0, 1, 2], [100, 50, 20])
        with pytest.raises(OutOfBounds):
            generalized_estimate(spec, s, (0.6,))


class TestLimit:
    times = np.array([0.0, 0.8, 1.5, 3.1, 3.6, 5.0])

    def test_g_star_vanishes_at_truth(self):
        spec = exp_decay_spec(0.05)
        np.testing.assert_array_equal(g_star_generalized((0.3, 0.2), (0.3, 0.2), spec, self.times), 0.0)

    @staticmethod
    def _scaled_ratio(lam, times, mu=0.1, lam0=0.2):
        gen = g_star_generalized((lam,), (lam0,), constant_rate_spec(mu), times)[0]
        ref = g_star(lam - mu, lam0 - mu, times)
        # the weights carry 1 / sigma2(theta); without it the two limits differ by a constant
        return gen * (lam + mu) / (lam - mu) / ref

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.12, 0.6).filter(lambda v: abs(v - 0.2) > 1e-4))
    def test_constant_rate_reduction(self, lam):
        assert self._scaled_ratio(lam, self.times) == pytest.approx(self._scaled_ratio(0.35, self.times), rel=1e-8)

    def test_finite_sample_close_to_limit(self):
        spec = exp_decay_spec(0.05)
        theta0 = np.array([0.3, 0.2])
        rng = np.random.default_rng(2024)
        grid, sizes = tau_leap_paths(
            lambda s: 0.3 * math.exp(-0.2 * s), lambda s: 0.05, 1_000_000, 1, self.times[-1], 0.005, seed=rng
        )
        idx = np.rint(self.times / 0.005).astype(int)
        s = ObservationSeries(self.times, sizes[idx, 0])
        worst = 0.0
        for a in np.linspace(0.2, 0.4, 5):
            for b in np.linspace(0.1, 0.3, 5):
                g = g_generalized((a, b), theta0, spec, s)
                gs = g_star_generalized((a, b), theta0, spec, self.times)
                worst = max(worst, float(np.max(np.abs(g - gs))))
        assert worst < 0.05
