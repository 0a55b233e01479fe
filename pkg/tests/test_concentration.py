"""Tests for the Monte Carlo concentration validators."""

import math

import numpy as np
import pytest

from phasecore.bounds import tau_star, truncated_second_moment
from phasecore.concentration import (
    frequency_outcome,
    order_stat_check,
    subcolumn_gaussianity_check,
    weak_energy_check,
    wishart_check,
)
from phasecore.errors import ContractViolation
from phasecore.linalg import RngStream


class TestFrequencyOutcome:

    def test_binomial_slack(self):
        outcome = frequency_outcome("x", successes=95, trials=100, bound_raw=0.97)
        assert outcome.tolerance == pytest.approx(3 * math.sqrt(0.97 * 0.03 / 100))
        assert outcome.passed

    def test_fails_beyond_slack(self):
        assert not frequency_outcome("x", successes=80, trials=100, bound_raw=0.97).passed

    def test_clamps_and_flags(self):
        outcome = frequency_outcome("x", successes=3, trials=10, bound_raw=-1.5)
        assert outcome.bound == 0.0 and outcome.bound_raw == -1.5
        assert outcome.clamped and outcome.passed

    def test_certain_bound_needs_every_trial(self):
        assert frequency_outcome("x", 10, 10, 1.0).passed
        assert not frequency_outcome("x", 9, 10, 1.0).passed


class TestOrderStatistics:

    @pytest.mark.slow
    def test_reference_run(self):
        report = order_stat_check(RngStream(0), 2, 4096, 1024, delta=0.5, eps=0.25, trials=1000)
        assert report.tau_star == pytest.approx(tau_star(0.25))
        assert report.tau_sorted.shape == (4096,)
        assert np.all(np.diff(report.tau_sorted) >= 0)
        assert all(o.passed for o in report.outcomes())
        assert report.freq_threshold >= report.bound_threshold - 1e-12
        assert report.freq_count >= report.bound_count - 1e-12

    def test_huge_delta(self):
        report = order_stat_check(RngStream(1), 2, 256, 64, delta=50.0, eps=0.25, trials=20)
        assert report.freq_threshold == 1.0

    def test_eps_near_one(self):
        report = order_stat_check(RngStream(2), 2, 256, 64, delta=0.5, eps=0.999, trials=20)
        assert report.freq_count == 1.0

    def test_worker_count_does_not_change_result(self):
        serial = order_stat_check(RngStream(3), 2, 512, 128, 0.5, 0.25, trials=8, workers=1)
        pooled = order_stat_check(RngStream(3), 2, 512, 128, 0.5, 0.25, trials=8, workers=2)
        assert serial.hits_threshold == pooled.hits_threshold
        assert serial.hits_count == pooled.hits_count

    def test_rejects_zero_trials(self):
        with pytest.raises(ContractViolation):
            order_stat_check(RngStream(0), 2, 256, 64, 0.5, 0.25, trials=0)


class TestWeakEnergy:

    @pytest.mark.slow
    def test_reference_run(self):
        report = weak_energy_check(
            RngStream(0), 2, 4096, 1024, eps=0.5, delta=1.0, t=1.0, trials=500
        )
        assert report.freq_energy >= report.bound_energy - 1e-12
        assert report.truncated_mean_expected == pytest.approx(
            truncated_second_moment(tau_star(0.25))
        )
        # 2,048,000 draws of b² χ
        assert abs(report.truncated_mean - report.truncated_mean_expected) <= (
            3 * report.truncated_mean_se
        )
        lo, hi = report.z_range
        assert lo <= report.z_min and report.z_max <= hi
        assert all(o.passed for o in report.outcomes())

    def test_tiny_bernstein_constant_is_clamped(self):
        report = weak_energy_check(
            RngStream(4), 2, 1024, 256, eps=0.5, delta=1.0, t=1.0, trials=5, c_bernstein=1e-9
        )
        energy = report.outcomes()[0]
        assert energy.bound_raw < 0
        assert energy.clamped and energy.bound == 0.0 and energy.passed


class TestWishart:

    @pytest.mark.slow
    def test_reference_run(self):
        report = wishart_check(RngStream(0), 64, 1024, t=0.5, trials=500)
        assert report.bound == pytest.approx(1 - 2 * math.exp(-8))
        assert all(o.passed for o in report.outcomes())

    def test_negative_lower_edge_checks_upper_only(self):
        report = wishart_check(RngStream(5), 64, 65, t=0.5, trials=20)
        assert report.interval[0] < 0
        assert report.frequency == 1.0

    def test_single_column(self):
        report = wishart_check(RngStream(6), 2, 16, t=0.5, trials=50)
        outcome = report.outcomes()[0]
        assert outcome.clamped and outcome.passed
        assert 0.0 <= report.frequency <= 1.0

    def test_rejects_small_rows(self):
        with pytest.raises(ContractViolation):
            wishart_check(RngStream(0), 8, 8, t=0.5, trials=5)


class TestSubcolumns:

    def test_standard_normal_moments(self):
        report = subcolumn_gaussianity_check(RngStream(0), 4, 32, 8, trials=2000)
        assert report.count == 2000 * 8 * 3
        assert all(o.passed for o in report.outcomes())
        assert report.var_re == pytest.approx(1.0, abs=0.05)
        assert report.var_im == pytest.approx(1.0, abs=0.05)

    def test_rejects_dimension_one(self):
        with pytest.raises(ContractViolation):
            subcolumn_gaussianity_check(RngStream(0), 1, 32, 8, trials=5)
