"""
Bounds Module
Closed-form distributional quantities of the weak measurements and the
non-asymptotic error/probability bounds for the null vector.

With ‖x0‖ = 1 every b(j)² is chi-square with density e^{-z/2}/2, so
F(τ) = 1 − e^{-τ/2} and the σ-quantile is τ* = −2 ln(1 − σ).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ParameterError

logger = logging.getLogger(__name__)

SMALL_SIGMA_LIMIT = 0.2
# Probability forms of the weak-set count differ; the theorem uses the floor form
COUNT_TERM_NOTE = (
    "count term uses exp(-2 floor(|I| eps)^2 / N); the weak-energy and order-statistic "
    "forms use 2exp(-2 eps^2 (1-sigma)^2 sigma^2 N) and 2exp(-4 eps^2 (1-sigma)^2 |I|^2 / N)"
)

ArrayLike = Union[float, np.ndarray]


def _open_unit(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class BoundParams:
    """
    Inputs of the theorem: aspect ratios, free parameters and, for the
    probability, the sizes.

    Either give sigma and nu directly (N optional), or use from_sizes.
    """

    sigma: float
    nu: float
    eps: float
    delta: float
    t: float
    c_bernstein: float = 1.0
    N: Optional[int] = None
    I_size: Optional[int] = None
    n: Optional[int] = None

    def __post_init__(self):
        _open_unit("sigma", self.sigma)
        _open_unit("nu", self.nu)
        _open_unit("eps", self.eps)
        if not self.delta > 0.0:
            raise ParameterError(f"delta must be positive, got {self.delta!r}")
        if not self.c_bernstein > 0.0:
            raise ParameterError(f"c must be positive, got {self.c_bernstein!r}")
        t_max = self.nu ** -0.5 - 1.0
        if not 0.0 < self.t < t_max:
            raise ParameterError(
                f"t must lie in (0, nu^(-1/2) - 1) = (0, {t_max:.17g}), got {self.t!r}"
            )
        if self.N is not None and self.N < 1:
            raise ParameterError(f"N must be positive, got {self.N}")
        if self.N is not None and self.I_size is not None:
            if abs(self.sigma - self.I_size / self.N) > 1e-12:
                raise ParameterError("sigma must equal I_size / N")
        if self.n is not None and self.I_size is not None:
            if abs(self.nu - self.n / self.I_size) > 1e-12:
                raise ParameterError("nu must equal n / I_size")

    @classmethod
    def from_sizes(
        cls,
        n: int,
        N: int,
        I_size: int,
        eps: float,
        delta: float,
        t: float,
        c_bernstein: float = 1.0
    ) -> "BoundParams":
        """Build parameters from (n, N, |I|); requires n < |I| < N."""
        if not 0 < n < I_size < N:
            raise ParameterError(f"Sizes must satisfy 0 < n < I_size < N, got {n}, {I_size}, {N}")
        return cls(
            sigma=I_size / N, nu=n / I_size, eps=eps, delta=delta, t=t,
            c_bernstein=c_bernstein, N=N, I_size=I_size, n=n
        )

    @property
    def weak_size(self) -> float:
        """|I|, exact when known, otherwise σN."""
        if self.I_size is not None:
            return float(self.I_size)
        if self.N is None:
            raise ParameterError("N is required to evaluate probability terms")
        return self.sigma * self.N


@dataclass(frozen=True)
class BoundResult:
    """Bound outputs; raw values, clamping is for display only."""

    err_rhs: float
    prob_lower: float
    q_term: float
    tail_term: float
    count_term: float
    small_sigma_warning: bool

    @property
    def prob_lower_clamped(self) -> float:
        return max(self.prob_lower, 0.0)


def chi2_cdf(tau: ArrayLike) -> ArrayLike:
    """F(τ) = 1 − e^{-τ/2} for τ ≥ 0."""
    arr = np.asarray(tau, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ParameterError(f"tau must be nonnegative, got {tau!r}")
    out = -np.expm1(-arr / 2.0)
    return float(out) if out.ndim == 0 else out


def tau_star(sigma: float) -> float:
    """τ* = −2 ln(1 − σ), so that F(τ*) = σ."""
    _open_unit("sigma", sigma)
    return -2.0 * math.log1p(-sigma)


def truncated_second_moment(tau: float) -> float:
    """E[b² χ{b² ≤ τ}] = 2 − (τ + 2) e^{-τ/2}."""
    if tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {tau!r}")
    if math.isinf(tau):
        return 2.0
    return 2.0 - (tau + 2.0) * math.exp(-tau / 2.0)


def centered_energy_range(N: int, I_size: int) -> Tuple[float, float]:
    """Range [−2, N² τ* / |I|²] of Z_i = N²/|I|² (b² χ − E[b² χ])."""
    sigma = I_size / N
    return -2.0, (N / I_size) ** 2 * tau_star(sigma)


def theorem_error_rhs(p: BoundParams, x0_norm: float = 1.0) -> float:
    """
    Right side of the error bound,
    ((2+t)/(1−ε) σ + ε(−2 ln(1−σ) + δ)) · 2‖x0‖⁴ / (1 − (1+t)√ν)².
    """
    bracket = (2.0 + p.t) / (1.0 - p.eps) * p.sigma + p.eps * (tau_star(p.sigma) + p.delta)
    return bracket * 2.0 * x0_norm ** 4 / (1.0 - (1.0 + p.t) * math.sqrt(p.nu)) ** 2


def weak_energy_rhs(N: int, I_size: int, eps: float, delta: float, t: float) -> float:
    """Bound |I| ((2+t)/(1−ε) σ + ε(τ* + δ)) on ‖b_I‖²."""
    sigma = I_size / N
    return I_size * ((2.0 + t) / (1.0 - eps) * sigma + eps * (tau_star(sigma) + delta))


def q_term(N: float, I_size: float, t: float, c_bernstein: float = 1.0) -> float:
    """
    Bernstein term 2 exp(−c min[e²t²/16 (ln σ⁻¹)² |I|²/N, et/4 |I| ln σ⁻¹]).

    Stated for σ ≪ 1; evaluated as-is at every σ.
    """
    sigma = I_size / N
    log_inv = -math.log(sigma)
    quad = math.e ** 2 * t ** 2 / 16.0 * log_inv ** 2 * I_size ** 2 / N
    lin = math.e * t / 4.0 * I_size * log_inv
    return 2.0 * math.exp(-c_bernstein * min(quad, lin))


def _tail_term(N: float, sigma: float, delta: float) -> float:
    return 2.0 * math.exp(-N * delta ** 2 * math.exp(-delta) * (1.0 - sigma) ** 2 / 2.0)


def prob_terms(p: BoundParams) -> Tuple[float, float, float]:
    """
    The three subtracted terms of the success probability.

    Returns:
        Tuple of (tail term, count term, Q)
    """
    if p.N is None:
        raise ParameterError("N is required to evaluate probability terms")
    size = p.weak_size
    tail = _tail_term(p.N, p.sigma, p.delta)
    count = math.exp(-2.0 * math.floor(size * p.eps) ** 2 / p.N)
    return tail, count, q_term(p.N, size, p.t, p.c_bernstein)


def theorem_prob_lower(p: BoundParams) -> BoundResult:
    """
    Evaluate the error bound and its success probability
    1 − 2exp(−N δ² e^{−δ} (1−σ)²/2) − exp(−2⌊|I|ε⌋²/N) − Q.

    Args:
        p: Bound parameters with N set

    Returns:
        BoundResult with raw (possibly negative) probability
    """
    tail, count, q = prob_terms(p)
    warn = p.sigma > SMALL_SIGMA_LIMIT
    if warn:
        logger.warning(
            f"sigma={p.sigma:.4g} > {SMALL_SIGMA_LIMIT}: Q is an asymptotic bound for sigma << 1"
        )
    return BoundResult(
        err_rhs=theorem_error_rhs(p),
        prob_lower=1.0 - tail - count - q,
        q_term=q,
        tail_term=tail,
        count_term=count,
        small_sigma_warning=warn
    )


def weak_energy_prob_lower(
    N: int,
    I_size: int,
    eps: float,
    delta: float,
    t: float,
    c_bernstein: float = 1.0
) -> float:
    """Probability that ‖b_I‖² stays below weak_energy_rhs."""
    sigma = I_size / N
    count = 2.0 * math.exp(-2.0 * eps ** 2 * (1.0 - sigma) ** 2 * sigma ** 2 * N)
    return 1.0 - _tail_term(N, sigma, delta) - count - q_term(N, I_size, t, c_bernstein)


def threshold_order_stat_bound(N: int, sigma: float, delta: float) -> float:
    """P(τ_|I| ≤ τ* + δ) ≥ 1 − exp(−N δ² e^{−δ} (1−σ)²/2)."""
    return 1.0 - 0.5 * _tail_term(N, sigma, delta)


def weak_count_bound(N: int, I_size: int, eps: float) -> float:
    """P(|Î| ≥ (1−ε)|I|) ≥ 1 − exp(−2⌊|I|ε⌋²/N)."""
    return 1.0 - math.exp(-2.0 * math.floor(I_size * eps) ** 2 / N)


def weak_count_bound_two_sided(N: int, I_size: int, eps: float) -> float:
    """Alternative form 1 − 2exp(−4ε²(1−σ)²|I|²/N)."""
    sigma = I_size / N
    return 1.0 - 2.0 * math.exp(-4.0 * eps ** 2 * (1.0 - sigma) ** 2 * I_size ** 2 / N)


def average_energy_prob_lower(N: int, I_size: int, eps: float, delta: float) -> float:
    """Probability of ‖b_I‖²/|I| ≤ ‖b̂‖²/|Î| + ε(τ* + δ)."""
    sigma = I_size / N
    count = 2.0 * math.exp(-2.0 * eps ** 2 * (1.0 - sigma) ** 2 * I_size ** 2 / N)
    return 1.0 - _tail_term(N, sigma, delta) - count


def wishart_interval(I_size: int, n: int, t: float) -> Tuple[float, float]:
    """[√|I| − (1+t)√n, √|I| + (1+t)√n]; the lower edge may be negative."""
    spread = (1.0 + t) * math.sqrt(n)
    root = math.sqrt(I_size)
    return root - spread, root + spread


def wishart_prob_lower(n: int, t: float) -> float:
    """1 − 2 e^{−n t²/2}."""
    return 1.0 - 2.0 * math.exp(-n * t ** 2 / 2.0)


def clamp_probability(value: float) -> Tuple[float, bool]:
    """
    Clamp a probability bound to [0, 1] for display.

    Returns:
        Tuple of (clamped value, whether clamping changed it)
    """
    clamped = min(max(value, 0.0), 1.0)
    return clamped, clamped != value
