from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbdp.errors import InvalidParams, ScheduleBeyondTrajectory
from lbdp.simulate import (
    exponential_series,
    gillespie,
    mean_path,
    observe,
    replicate_seed,
    sample_schedule,
    sample_skeleton,
    sample_transition,
    step_values,
    tau_leap,
    tau_leap_paths,
)
from lbdp.transition import coeffs
from lbdp.types import RateParams, Trajectory


class TestGillespie:
    def test_pure_birth_steps_up(self):
        tr = gillespie(RateParams(1.0, 0.0), 1, 3.0, seed=1)
        assert np.all(np.diff(tr.sizes) == 1)
        assert np.all(np.diff(tr.event_times) > 0)
        assert tr.event_times[-1] <= 3.0

    def test_pure_death_hits_zero_in_x0_events(self):
        tr = gillespie(RateParams(0.0, 1.0), 5, 1e6, seed=2)
        np.testing.assert_array_equal(tr.sizes, [5, 4, 3, 2, 1, 0])
        assert tr.extinct

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_unit_steps_and_absorption(self, seed):
        tr = gillespie(RateParams(0.5, 0.6), 3, 10.0, seed)
        assert np.all(np.abs(np.diff(tr.sizes)) == 1)
        assert np.all(tr.sizes >= 0)
        assert np.count_nonzero(tr.sizes == 0) <= 1

    def test_same_seed_same_path(self):
        a = gillespie(RateParams(0.2, 0.1), 50, 5.0, seed=9)
        b = gillespie(RateParams(0.2, 0.1), 50, 5.0, seed=9)
        np.testing.assert_array_equal(a.event_times, b.event_times)
        np.testing.assert_array_equal(a.sizes, b.sizes)

    def test_long_path_uses_several_blocks(self):
        tr = gillespie(RateParams(1.0, 0.5), 1000, 3.0, seed=4)
        assert tr.sizes.size > 1000
        assert np.all(np.abs(np.diff(tr.sizes)) == 1)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidParams):
            gillespie(RateParams(0.2, 0.1), 0, 1.0, seed=1)
        with pytest.raises(InvalidParams):
            gillespie(RateParams(0.2, 0.1), 1, 0.0, seed=1)


class TestTauLeap:
    def test_zero_rates_give_constant_path(self):
        grid, sizes = tau_leap_paths(lambda t: 0.0, lambda t: 0.0, 7, 3, 1.0, 0.1, seed=1)
        assert np.all(sizes == 7)
        assert grid[-1] == pytest.approx(1.0)

    def test_absorbed_at_zero(self):
        grid, sizes = tau_leap_paths(lambda t: 0.1, lambda t: 5.0, 3, 200, 5.0, 0.05, seed=3)
        for path in sizes.T:
            dead = np.flatnonzero(path == 0)
            if dead.size:
                assert np.all(path[dead[0]:] == 0)
        assert np.all(sizes >= 0)

    def test_mean_matches_discrete_growth(self):
        # each leap multiplies the mean by exactly 1 + alpha h, as long as
        # the zero clamp is never hit
        _, sizes = tau_leap_paths(lambda t: 2.0, lambda t: 1.0, 100, 5000, 2.0, 0.01, seed=11)
        final = sizes[-1]
        se = final.std(ddof=1) / math.sqrt(final.size)
        assert abs(final.mean() - 100 * 1.01**200) < 3 * se
        # the leap bias against continuous growth is about 1% here
        assert final.mean() == pytest.approx(100 * math.exp(2.0), rel=0.02)

    def test_single_path_wrapper(self):
        tr = tau_leap(RateParams(0.2, 0.1), 10, 1.0, 0.25, seed=5)
        assert tr.method == "tau-leap"
        np.testing.assert_allclose(tr.event_times, [0, 0.25, 0.5, 0.75, 1.0])

    def test_rejects_bad_step(self):
        with pytest.raises(InvalidParams):
            tau_leap(RateParams(0.2, 0.1), 10, 1.0, 0.0, seed=5)


class TestSchedule:
    def test_exponential_gaps(self):
        gaps = np.diff(sample_schedule(100_001, 1.0, 1.0, seed=3))
        assert abs(gaps.mean() - 1.0) < 3 * gaps.std(ddof=1) / math.sqrt(gaps.size)

    def test_small_shape_gaps(self):
        gaps = np.diff(sample_schedule(100_001, 0.2, 1.0, seed=4))
        assert abs(gaps.mean() - 0.2) < 3 * gaps.std(ddof=1) / math.sqrt(gaps.size)
        assert np.all(gaps > 0)

    def test_minimal_schedule(self):
        times = sample_schedule(2, 1.0, 1.0, seed=1)
        assert times.size == 2 and times[0] == 0.0 and times[1] > 0

    def test_rate_scales_gaps(self):
        a = sample_schedule(10, 1.0, 1.0, seed=8)
        b = sample_schedule(10, 1.0, 4.0, seed=8)
        np.testing.assert_allclose(b, a / 4.0)

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            sample_schedule(1, 1.0)
        with pytest.raises(InvalidParams):
            sample_schedule(5, 0.0)


class TestObserve:
    traj = Trajectory([0.0, 1.0, 2.5, 4.0], [3, 4, 3, 4], "exact", 5.0)

    def test_before_first_event(self):
        s = observe(self.traj, [0.0, 0.3, 0.9])
        np.testing.assert_array_equal(s.counts, [3, 3, 3])

    def test_right_continuous_at_events(self):
        s = observe(self.traj, [0.0, 1.0, 2.5, 5.0])
        np.testing.assert_array_equal(s.counts, [3, 4, 3, 4])

    def test_dense_schedule_reproduces_path(self):
        tr = gillespie(RateParams(0.5, 0.3), 20, 4.0, seed=7)
        times = np.linspace(0, 4.0, 20001)
        s = observe(tr, times)
        for t_ev, size in zip(tr.event_times, tr.sizes):
            k = np.searchsorted(times, t_ev, side="right") - 1
            if k + 1 < times.size:
                nxt = tr.event_times[tr.event_times > times[k]]
                if nxt.size == 0 or nxt[0] > times[k + 1]:
                    assert s.counts[k] == step_values(tr.event_times, tr.sizes, [times[k]])[0]
        changes = np.flatnonzero(np.diff(s.counts))
        assert changes.size <= tr.sizes.size - 1

    def test_beyond_horizon(self):
        with pytest.raises(ScheduleBeyondTrajectory):
            observe(self.traj, [0.0, 6.0])

    def test_before_start(self):
        with pytest.raises(ScheduleBeyondTrajectory):
            step_values(np.array([1.0, 2.0]), np.array([1, 2]), [0.5])


class TestExactDraws:
    def test_transition_mean_and_extinction(self):
        p = RateParams(0.2, 0.1)
        draws = sample_transition(p, np.full(100_000, 1), 3.0, seed=5)
        a = coeffs(p, 3.0).a
        freq = np.mean(draws == 0)
        assert abs(freq - a) < 3 * math.sqrt(a * (1 - a) / draws.size)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - math.exp(0.3)) < 3 * se

    def test_scalar_input(self):
        v = sample_transition(RateParams(0.2, 0.1), 10, 1.0, seed=1)
        assert np.ndim(v) == 0

    def test_skeleton_absorbs(self):
        s = sample_skeleton(RateParams(0.0, 3.0), 2, [0, 1, 2, 3, 4], seed=1)
        dead = np.flatnonzero(s.counts == 0)
        if dead.size:
            assert np.all(s.counts[dead[0]:] == 0)


class TestHelpers:
    def test_replicate_seeds_differ(self):
        a = np.random.default_rng(replicate_seed(1, 0)).random()
        b = np.random.default_rng(replicate_seed(1, 1)).random()
        c = np.random.default_rng(replicate_seed(1, 0)).random()
        assert a != b and a == c

    def test_mean_path(self):
        out = mean_path(10.0, lambda i, dt: math.exp(0.1 * dt), [0, 1, 3])
        np.testing.assert_allclose(out, 10 * np.exp(0.1 * np.array([0, 1, 3])))

    def test_exponential_series_rounding(self):
        s = exponential_series(1000, 0.1, [0, 0.7, 1.9, 3.2], rounding="round")
        np.testing.assert_array_equal(s.counts, [1000, 1073, 1209, 1377])
