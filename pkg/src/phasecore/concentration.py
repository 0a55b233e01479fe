"""
Concentration Module
Monte Carlo validators for the concentration steps behind the error bound:
order statistics of b², weak-set energy, Wishart singular values and the
Gaussianity of the rotated weak sub-columns.

Each trial owns the stream rng.child(trial); aggregation is by counts and
ordered sums, so results do not depend on the worker count.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import linalg as sla

from .bounds import (
    average_energy_prob_lower,
    centered_energy_range,
    clamp_probability,
    tau_star,
    threshold_order_stat_bound,
    truncated_second_moment,
    weak_count_bound,
    weak_count_bound_two_sided,
    weak_energy_prob_lower,
    weak_energy_rhs,
    wishart_interval,
    wishart_prob_lower,
)
from .errors import ContractViolation
from .estimators import make_ensemble, rotated_subcolumns, select_weak
from .harness import parallel_map
from .linalg import RngStream

logger = logging.getLogger(__name__)

BINOMIAL_SLACK = 3.0
MEAN_SLACK = 3.0
GAUSSIAN_SLACK = 5.0


@dataclass(frozen=True)
class CheckOutcome:
    """
    One empirical-vs-theory comparison.

    For kind 'frequency' the bound is a probability lower bound, clamped to
    [0, 1] for comparison; bound_raw keeps the evaluated value.
    """

    name: str
    kind: str
    trials: int
    empirical: float
    bound: float
    bound_raw: float
    tolerance: float
    clamped: bool
    passed: bool


def frequency_outcome(name: str, successes: int, trials: int, bound_raw: float) -> CheckOutcome:
    """
    Compare an empirical frequency against a one-sided probability bound
    with 3 binomial standard deviations of slack.
    """
    freq = successes / trials
    bound, clamped = clamp_probability(bound_raw)
    tolerance = BINOMIAL_SLACK * math.sqrt(bound * (1.0 - bound) / trials)
    return CheckOutcome(
        name=name, kind="frequency", trials=trials, empirical=freq, bound=bound,
        bound_raw=bound_raw, tolerance=tolerance, clamped=clamped,
        passed=freq >= bound - tolerance
    )


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise ContractViolation(f"trials must be at least 1, got {trials}")


def _check_sizes(n: int, N: int, I_size: int) -> None:
    if not (n >= 1 and N >= 2 * n and 0 < I_size < N):
        raise ContractViolation(f"Invalid sizes n={n}, N={N}, I_size={I_size}")


def _squared_magnitudes(stream: RngStream, n: int, N: int) -> np.ndarray:
    return make_ensemble(stream, n, N).b ** 2


# -- order statistics --------------------------------------------------------

@dataclass(frozen=True)
class OrderStatReport:
    tau_sorted: np.ndarray
    tau_star: float
    delta: float
    eps: float
    trials: int
    hits_threshold: int
    hits_count: int
    freq_threshold: float
    freq_count: float
    bound_threshold: float
    bound_count: float
    bound_count_two_sided: float

    def outcomes(self) -> List[CheckOutcome]:
        return [
            frequency_outcome(
                "order_stats.tau_I", self.hits_threshold, self.trials, self.bound_threshold
            ),
            frequency_outcome("order_stats.count", self.hits_count, self.trials, self.bound_count),
        ]


def _order_stat_trial(args: Tuple) -> Tuple[bool, bool]:
    stream, n, N, I_size, tau_s, delta, eps = args
    tau = np.sort(_squared_magnitudes(stream, n, N))
    hit_threshold = bool(tau[I_size - 1] <= tau_s + delta)
    hit_count = bool(np.count_nonzero(tau <= tau_s) >= (1.0 - eps) * I_size)
    return hit_threshold, hit_count


def order_stat_check(
    rng: RngStream,
    n: int,
    N: int,
    I_size: int,
    delta: float,
    eps: float,
    trials: int,
    workers: int = 1
) -> OrderStatReport:
    """
    Frequency of τ_|I| ≤ τ* + δ and of |Î| ≥ (1 − ε)|I| over independent
    ensembles, with the matching probability lower bounds.

    Args:
        rng: Base stream; trial k uses rng.child(k)
        n: Signal dimension
        N: Number of measurements
        I_size: Weak set size
        delta: Threshold slack δ > 0
        eps: Count slack ε in (0, 1)
        trials: Number of ensembles
        workers: Worker processes

    Returns:
        OrderStatReport
    """
    _check_trials(trials)
    _check_sizes(n, N, I_size)
    sigma = I_size / N
    tau_s = tau_star(sigma)

    jobs = [(rng.child(k), n, N, I_size, tau_s, delta, eps) for k in range(trials)]
    results = parallel_map(_order_stat_trial, jobs, workers)
    hits_threshold = sum(1 for hit, _ in results if hit)
    hits_count = sum(1 for _, hit in results if hit)

    report = OrderStatReport(
        tau_sorted=np.sort(_squared_magnitudes(rng.child(0), n, N)),
        tau_star=tau_s,
        delta=delta,
        eps=eps,
        trials=trials,
        hits_threshold=hits_threshold,
        hits_count=hits_count,
        freq_threshold=hits_threshold / trials,
        freq_count=hits_count / trials,
        bound_threshold=threshold_order_stat_bound(N, sigma, delta),
        bound_count=weak_count_bound(N, I_size, eps),
        bound_count_two_sided=weak_count_bound_two_sided(N, I_size, eps),
    )
    logger.info(
        f"Order statistics: freq_threshold={report.freq_threshold:.4f} "
        f"(bound {report.bound_threshold:.4g}), freq_count={report.freq_count:.4f} "
        f"(bound {report.bound_count:.4g})"
    )
    return report


# -- weak-set energy ---------------------------------------------------------

@dataclass(frozen=True)
class WeakEnergyReport:
    trials: int
    hits_energy: int
    hits_average: int
    freq_energy: float
    bound_energy: float
    freq_average: float
    bound_average: float
    truncated_mean: float
    truncated_mean_se: float
    truncated_mean_expected: float
    z_min: float
    z_max: float
    z_range: Tuple[float, float]

    def outcomes(self) -> List[CheckOutcome]:
        mean_tol = MEAN_SLACK * self.truncated_mean_se
        lo, hi = self.z_range
        return [
            frequency_outcome("weak_energy.norm", self.hits_energy, self.trials, self.bound_energy),
            frequency_outcome(
                "weak_energy.average", self.hits_average, self.trials, self.bound_average
            ),
            CheckOutcome(
                name="weak_energy.truncated_mean", kind="mean", trials=self.trials,
                empirical=self.truncated_mean, bound=self.truncated_mean_expected,
                bound_raw=self.truncated_mean_expected, tolerance=mean_tol, clamped=False,
                passed=abs(self.truncated_mean - self.truncated_mean_expected) <= mean_tol
            ),
            CheckOutcome(
                name="weak_energy.centered_range", kind="range", trials=self.trials,
                empirical=self.z_max, bound=hi, bound_raw=hi, tolerance=0.0, clamped=False,
                passed=lo <= self.z_min and self.z_max <= hi
            ),
        ]


def _weak_energy_trial(args: Tuple) -> Tuple[bool, bool, float, float, float, float]:
    stream, n, N, I_size, tau_s, rhs, slack, expected = args
    b2 = _squared_magnitudes(stream, n, N)
    weak = float(np.sum(np.sort(b2)[:I_size]))
    truncated = np.where(b2 <= tau_s, b2, 0.0)
    count = int(np.count_nonzero(b2 <= tau_s))
    b_hat = float(np.sum(truncated))

    hit_energy = weak <= rhs
    hit_average = count > 0 and weak / I_size <= b_hat / count + slack

    z = (N / I_size) ** 2 * (truncated - expected)
    truncated_energy = float(np.sum(truncated ** 2))
    return hit_energy, hit_average, b_hat, truncated_energy, float(z.min()), float(z.max())


def weak_energy_check(
    rng: RngStream,
    n: int,
    N: int,
    I_size: int,
    eps: float,
    delta: float,
    t: float,
    trials: int,
    c_bernstein: float = 1.0,
    workers: int = 1
) -> WeakEnergyReport:
    """
    Frequencies of ‖b_I‖² ≤ |I|((2+t)/(1−ε)σ + ε(τ* + δ)) and of
    ‖b_I‖²/|I| ≤ ‖b̂‖²/|Î| + ε(τ* + δ), the sample mean of b² χ{b² ≤ τ*}
    against 2 − (τ*+2)e^{−τ*/2}, and the range of the centered variables.

    Args:
        rng: Base stream; trial k uses rng.child(k)
        n: Signal dimension
        N: Number of measurements
        I_size: Weak set size
        eps: ε in (0, 1)
        delta: δ > 0
        t: t > 0
        trials: Number of ensembles
        c_bernstein: Bernstein constant for the probability bound
        workers: Worker processes

    Returns:
        WeakEnergyReport
    """
    _check_trials(trials)
    _check_sizes(n, N, I_size)
    sigma = I_size / N
    tau_s = tau_star(sigma)
    rhs = weak_energy_rhs(N, I_size, eps, delta, t)
    slack = eps * (tau_s + delta)
    expected = truncated_second_moment(tau_s)

    jobs = [(rng.child(k), n, N, I_size, tau_s, rhs, slack, expected) for k in range(trials)]
    results = parallel_map(_weak_energy_trial, jobs, workers)

    hits_energy = sum(1 for r in results if r[0])
    hits_average = sum(1 for r in results if r[1])
    draws = trials * N
    total = math.fsum(r[2] for r in results)
    total_sq = math.fsum(r[3] for r in results)
    mean = total / draws
    var = max(total_sq / draws - mean ** 2, 0.0)

    report = WeakEnergyReport(
        trials=trials,
        hits_energy=hits_energy,
        hits_average=hits_average,
        freq_energy=hits_energy / trials,
        bound_energy=weak_energy_prob_lower(N, I_size, eps, delta, t, c_bernstein),
        freq_average=hits_average / trials,
        bound_average=average_energy_prob_lower(N, I_size, eps, delta),
        truncated_mean=mean,
        truncated_mean_se=math.sqrt(var / draws),
        truncated_mean_expected=expected,
        z_min=min(r[4] for r in results),
        z_max=max(r[5] for r in results),
        z_range=centered_energy_range(N, I_size),
    )
    logger.info(
        f"Weak energy: freq={report.freq_energy:.4f} (bound {report.bound_energy:.4g}), "
        f"truncated mean {mean:.6g} vs {expected:.6g}"
    )
    return report


# -- Wishart singular values -------------------------------------------------

@dataclass(frozen=True)
class WishartReport:
    trials: int
    hits: int
    frequency: float
    bound: float
    interval: Tuple[float, float]
    sv_min: float
    sv_max: float

    def outcomes(self) -> List[CheckOutcome]:
        return [frequency_outcome("wishart.interval", self.hits, self.trials, self.bound)]


def _wishart_trial(args: Tuple) -> Tuple[bool, float, float]:
    stream, rows, cols, lo, hi = args
    m = stream.generator().standard_normal((rows, cols))
    s = sla.svdvals(m)
    # singular values are nonnegative, so a negative lower edge never binds
    inside = bool(s.min() >= max(lo, 0.0) and s.max() <= hi)
    return inside, float(s.min()), float(s.max())


def wishart_check(
    rng: RngStream,
    n: int,
    I_size: int,
    t: float,
    trials: int,
    workers: int = 1
) -> WishartReport:
    """
    Frequency that every singular value of a real |I| × (n−1) standard
    Gaussian matrix lies in [√|I| − (1+t)√n, √|I| + (1+t)√n].

    Args:
        rng: Base stream; trial k uses rng.child(k)
        n: Signal dimension, at least 2
        I_size: Rows, greater than n
        t: t > 0
        trials: Number of matrices
        workers: Worker processes

    Returns:
        WishartReport
    """
    _check_trials(trials)
    if n < 2 or I_size <= n:
        raise ContractViolation(f"Need n >= 2 and I_size > n, got n={n}, I_size={I_size}")
    if not t > 0:
        raise ContractViolation(f"t must be positive, got {t!r}")

    lo, hi = wishart_interval(I_size, n, t)
    jobs = [(rng.child(k), I_size, n - 1, lo, hi) for k in range(trials)]
    results = parallel_map(_wishart_trial, jobs, workers)
    hits = sum(1 for inside, _, _ in results if inside)

    report = WishartReport(
        trials=trials,
        hits=hits,
        frequency=hits / trials,
        bound=wishart_prob_lower(n, t),
        interval=(lo, hi),
        sv_min=min(r[1] for r in results),
        sv_max=max(r[2] for r in results),
    )
    logger.info(f"Wishart: freq={report.frequency:.4f} (bound {report.bound:.4g})")
    return report


# -- rotated sub-column Gaussianity ------------------------------------------

@dataclass(frozen=True)
class SubcolumnReport:
    trials: int
    count: int
    mean_re: float
    mean_im: float
    var_re: float
    var_im: float
    se_mean: float
    se_var: float

    def outcomes(self) -> List[CheckOutcome]:
        rows = []
        for label, value, target, se in (
            ("mean_re", self.mean_re, 0.0, self.se_mean),
            ("mean_im", self.mean_im, 0.0, self.se_mean),
            ("var_re", self.var_re, 1.0, self.se_var),
            ("var_im", self.var_im, 1.0, self.se_var),
        ):
            tol = GAUSSIAN_SLACK * se
            rows.append(CheckOutcome(
                name=f"subcolumn.{label}", kind="mean", trials=self.trials, empirical=value,
                bound=target, bound_raw=target, tolerance=tol, clamped=False,
                passed=abs(value - target) <= tol
            ))
        return rows


def _subcolumn_trial(args: Tuple) -> Tuple[float, float, float, float]:
    stream, n, N, I_size = args
    ensemble = make_ensemble(stream, n, N)
    sub = rotated_subcolumns(ensemble, select_weak(ensemble, I_size))
    return (
        float(np.sum(sub.real)), float(np.sum(sub.real ** 2)),
        float(np.sum(sub.imag)), float(np.sum(sub.imag ** 2)),
    )


def subcolumn_gaussianity_check(
    rng: RngStream,
    n: int,
    N: int,
    I_size: int,
    trials: int,
    workers: int = 1
) -> SubcolumnReport:
    """
    Pooled mean and variance of the real and imaginary parts of the
    rotated weak sub-columns A'; they should be standard normal.

    Args:
        rng: Base stream; trial k uses rng.child(k)
        n: Signal dimension, at least 2
        N: Number of measurements
        I_size: Weak set size, n < I_size < N
        trials: Number of ensembles
        workers: Worker processes

    Returns:
        SubcolumnReport
    """
    _check_trials(trials)
    if n < 2:
        raise ContractViolation(f"Need n >= 2 for a nonempty sub-column matrix, got {n}")
    _check_sizes(n, N, I_size)

    jobs = [(rng.child(k), n, N, I_size) for k in range(trials)]
    results = parallel_map(_subcolumn_trial, jobs, workers)
    count = trials * I_size * (n - 1)
    sums = [math.fsum(r[i] for r in results) for i in range(4)]
    mean_re, mean_im = sums[0] / count, sums[2] / count
    report = SubcolumnReport(
        trials=trials,
        count=count,
        mean_re=mean_re,
        mean_im=mean_im,
        var_re=sums[1] / count - mean_re ** 2,
        var_im=sums[3] / count - mean_im ** 2,
        se_mean=1.0 / math.sqrt(count),
        se_var=math.sqrt(2.0 / count),
    )
    logger.info(
        f"Sub-columns: mean=({mean_re:.4g}, {mean_im:.4g}), "
        f"var=({report.var_re:.4g}, {report.var_im:.4g}) over {count} entries"
    )
    return report
