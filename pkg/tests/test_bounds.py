"""Tests for the closed-form distribution facts and the error/probability bounds."""

import math

import numpy as np
import pytest

from phasecore.bounds import (
    BoundParams,
    average_energy_prob_lower,
    centered_energy_range,
    chi2_cdf,
    clamp_probability,
    weak_count_bound,
    weak_count_bound_two_sided,
    threshold_order_stat_bound,
    prob_terms,
    q_term,
    tau_star,
    theorem_error_rhs,
    theorem_prob_lower,
    truncated_second_moment,
    weak_energy_prob_lower,
    weak_energy_rhs,
    wishart_interval,
    wishart_prob_lower,
)
from phasecore.errors import ParameterError


def _params(**overrides):
    values = dict(sigma=0.1, nu=0.5, eps=0.5, delta=1.0, t=0.1)
    values.update(overrides)
    return BoundParams(**values)


class TestChiSquare:

    def test_cdf_at_origin(self):
        assert chi2_cdf(0.0) == 0.0

    def test_cdf_at_median(self):
        assert chi2_cdf(2.0 * math.log(2.0)) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("sigma", [0.01, 0.1, 0.25, 0.5, 0.9])
    def test_quantile_identity(self, sigma):
        assert abs(chi2_cdf(tau_star(sigma)) - sigma) <= 1e-12

    def test_cdf_vectorized(self):
        out = chi2_cdf(np.array([0.0, 2.0 * math.log(2.0)]))
        assert np.allclose(out, [0.0, 0.5])

    def test_cdf_nondecreasing_on_grid(self):
        values = chi2_cdf(np.linspace(0.0, 60.0, 10_000))
        assert np.all(np.diff(values) >= 0.0)
        assert values[0] == 0.0 and values[-1] <= 1.0

    def test_cdf_rejects_negative(self):
        with pytest.raises(ParameterError):
            chi2_cdf(-1.0)

    def test_tau_star_values(self):
        assert tau_star(0.5) == pytest.approx(1.3862944, abs=1e-7)
        assert tau_star(0.25) == pytest.approx(0.5753641, abs=1e-7)

    def test_tau_star_small_sigma(self):
        sigma = 1e-6
        assert tau_star(sigma) == pytest.approx(2 * sigma + sigma ** 2, rel=1e-9)

    @pytest.mark.parametrize("sigma", [0.0, 1.0, -0.1])
    def test_tau_star_rejects(self, sigma):
        with pytest.raises(ParameterError):
            tau_star(sigma)

    def test_truncated_second_moment(self):
        assert truncated_second_moment(0.0) == 0.0
        assert truncated_second_moment(math.inf) == 2.0
        assert truncated_second_moment(200.0) == pytest.approx(2.0, abs=1e-12)

    def test_centered_range(self):
        lo, hi = centered_energy_range(4096, 1024)
        assert lo == -2.0
        assert hi == pytest.approx(16.0 * tau_star(0.25))


class TestErrorBound:

    def test_reference_value(self):
        sigma, nu, eps, delta, t = 0.1, 0.5, 0.5, 1.0, 0.1
        bracket = (2 + t) / (1 - eps) * sigma + eps * (-2 * math.log(1 - sigma) + delta)
        oracle = bracket * 2 / (1 - (1 + t) * math.sqrt(nu)) ** 2
        value = theorem_error_rhs(_params())
        assert value == pytest.approx(oracle, rel=1e-12)
        assert value == pytest.approx(41.54, abs=0.01)

    def test_small_sigma_limit(self):
        limit = 2 * 0.5 * 1.0 / (1 - 1.1 * math.sqrt(0.5)) ** 2
        assert theorem_error_rhs(_params(sigma=1e-12)) == pytest.approx(limit, rel=1e-9)

    def test_quartic_in_signal_norm(self):
        p = _params()
        assert theorem_error_rhs(p, x0_norm=2.0) == pytest.approx(16 * theorem_error_rhs(p))

    def test_increasing_in_sigma(self):
        values = [theorem_error_rhs(_params(sigma=s)) for s in np.linspace(1e-4, 0.99, 200)]
        assert np.all(np.diff(values) > 0.0)

    def test_increasing_in_delta(self):
        values = [theorem_error_rhs(_params(delta=d)) for d in np.linspace(0.01, 10.0, 200)]
        assert np.all(np.diff(values) > 0.0)


class TestParameters:

    def test_t_at_upper_edge(self):
        t_max = 0.5 ** -0.5 - 1.0
        with pytest.raises(ParameterError, match="t must lie in"):
            _params(t=t_max)

    @pytest.mark.parametrize("field,value", [
        ("sigma", 0.0), ("nu", 1.0), ("eps", 1.0), ("delta", 0.0), ("t", 0.0),
        ("c_bernstein", 0.0),
    ])
    def test_rejects_out_of_range(self, field, value):
        with pytest.raises(ParameterError, match=field.split("_")[0]):
            _params(**{field: value})

    def test_from_sizes(self):
        p = BoundParams.from_sizes(64, 1024, 256, 0.5, 1.0, 0.1)
        assert p.sigma == 0.25 and p.nu == 0.25 and p.weak_size == 256.0

    def test_from_sizes_rejects_order(self):
        with pytest.raises(ParameterError):
            BoundParams.from_sizes(64, 1024, 32, 0.5, 1.0, 0.1)

    def test_inconsistent_sizes(self):
        with pytest.raises(ParameterError):
            BoundParams(sigma=0.2, nu=0.5, eps=0.5, delta=1.0, t=0.1, N=100, I_size=10)


class TestProbability:

    def test_reference_value(self):
        N, size, eps, delta, t, c = 4096, 512, 0.5, 1.0, 0.1, 1.0
        sigma = size / N
        p = BoundParams(sigma=sigma, nu=0.5, eps=eps, delta=delta, t=t, c_bernstein=c, N=N)

        log_inv = math.log(1 / sigma)
        q = 2 * math.exp(-c * min(
            math.e ** 2 * t ** 2 / 16 * log_inv ** 2 * size ** 2 / N,
            math.e * t / 4 * size * log_inv,
        ))
        oracle = (
            1
            - 2 * math.exp(-N * delta ** 2 * math.exp(-delta) * (1 - sigma) ** 2 / 2)
            - math.exp(-2 * math.floor(size * eps) ** 2 / N)
            - q
        )
        result = theorem_prob_lower(p)
        assert result.prob_lower == pytest.approx(oracle, rel=1e-12)
        assert result.q_term == pytest.approx(q, rel=1e-12)
        assert not result.small_sigma_warning

    def test_tail_term_grows_beyond_delta_two(self):
        tail_2, _, _ = prob_terms(_params(delta=2.0, N=10))
        tail_4, _, _ = prob_terms(_params(delta=4.0, N=10))
        assert 4 * math.exp(-2) > 16 * math.exp(-4)
        assert tail_2 < tail_4

    def test_tends_to_one_with_N(self):
        values = [theorem_prob_lower(_params(N=N)).prob_lower for N in (10 ** 3, 10 ** 5, 10 ** 7)]
        assert values[0] < values[1] <= values[2]
        assert values[2] == pytest.approx(1.0, abs=1e-9)

    def test_raw_value_can_be_negative(self):
        result = theorem_prob_lower(_params(N=100))
        assert result.prob_lower < 0
        assert result.prob_lower_clamped == 0.0

    def test_small_sigma_warning(self, caplog):
        result = theorem_prob_lower(_params(sigma=0.3, N=1000))
        assert result.small_sigma_warning
        assert "sigma" in caplog.text

    def test_requires_N(self):
        with pytest.raises(ParameterError):
            theorem_prob_lower(_params())

    def test_q_term_shrinks_with_c(self):
        assert q_term(4096, 512, 0.1, 10.0) < q_term(4096, 512, 0.1, 1.0)


class TestValidatorBounds:

    def test_order_stat_forms(self):
        N, sigma, delta = 4096, 0.25, 0.5
        expected = 1 - math.exp(-N * delta ** 2 * math.exp(-delta) * (1 - sigma) ** 2 / 2)
        assert threshold_order_stat_bound(N, sigma, delta) == pytest.approx(expected)
        assert weak_count_bound(N, 1024, 0.25) == pytest.approx(1 - math.exp(-32))
        expected_two_sided = 1 - 2 * math.exp(-4 * 0.0625 * 0.5625 * 1024 ** 2 / N)
        assert weak_count_bound_two_sided(N, 1024, 0.25) == pytest.approx(expected_two_sided)

    def test_weak_energy_rhs(self):
        expected = 1024 * (3 / 0.5 * 0.25 + 0.5 * (tau_star(0.25) + 1))
        assert weak_energy_rhs(4096, 1024, 0.5, 1.0, 1.0) == pytest.approx(expected)

    def test_weak_energy_probability_near_one(self):
        assert weak_energy_prob_lower(4096, 1024, 0.5, 1.0, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert average_energy_prob_lower(4096, 1024, 0.5, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_wishart(self):
        lo, hi = wishart_interval(1024, 64, 0.5)
        assert (lo, hi) == (pytest.approx(20.0), pytest.approx(44.0))
        assert wishart_prob_lower(64, 0.5) == pytest.approx(1 - 2 * math.exp(-8))

    def test_wishart_negative_lower_edge(self):
        lo, _ = wishart_interval(65, 64, 0.5)
        assert lo < 0


class TestClamp:

    @pytest.mark.parametrize("value,expected,flag", [
        (-0.3, 0.0, True), (0.5, 0.5, False), (1.2, 1.0, True), (1.0, 1.0, False),
    ])
    def test_clamp(self, value, expected, flag):
        assert clamp_probability(value) == (expected, flag)
