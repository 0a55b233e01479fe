"""
Estimators Module
Measurement ensembles, weak/strong index splits, the null and spectral
vector estimators, and phase-invariant error metrics.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolation
from .linalg import (
    DENSE_MAX,
    RngStream,
    hermitian_eig_largest,
    hermitian_eig_smallest,
    sample_complex_gaussian,
    unitary_with_first_column,
)

logger = logging.getLogger(__name__)

METHODS = ("null", "spectral")
NORM_RTOL = 1e-8
CERT_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """
    One phase retrieval instance: A (n × N), x0, y = A* x0 and b = |y|.
    """

    A: np.ndarray
    x0: np.ndarray
    y: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.A.ndim != 2:
            raise ContractViolation(f"A must be a matrix, got shape {self.A.shape}")
        n, N = self.A.shape
        if n < 1 or N < 2 * n:
            raise ContractViolation(f"Need n >= 1 and N >= 2n, got n={n}, N={N}")
        if self.x0.shape != (n,) or self.y.shape != (N,) or self.b.shape != (N,):
            raise ContractViolation("x0, y, b have inconsistent lengths")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.x0))):
            raise ContractViolation("Ensemble has non-finite entries")

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    @property
    def N(self) -> int:
        return int(self.A.shape[1])

    @property
    def x0_norm(self) -> float:
        return float(np.linalg.norm(self.x0))


@dataclass(frozen=True, eq=False)
class IndexSplit:
    """Weak set I (smallest magnitudes) and its complement, both ascending."""

    I: np.ndarray
    I_c: np.ndarray
    sigma: float

    @property
    def size(self) -> int:
        return int(self.I.shape[0])


@dataclass(frozen=True, eq=False)
class Estimate:
    """
    Output of an estimator together with its error against x0.

    err_sq is ‖x0 x0* − x_hat x_hat*‖_F², align_inner is |x0* x_hat| and
    rel_err is the phase-aligned relative distance min_α ‖α x_hat − x0‖/‖x0‖.
    """

    method: str
    x_hat: np.ndarray
    align_inner: float
    err_sq: float
    rel_err: float
    iterations: int
    eigenvalue: float


@dataclass(frozen=True, eq=False)
class Certificate:
    """Per-instance closeness certificate ¼ err_sq ≤ ‖b_I‖² / ‖A_I* x_⊥‖²."""

    beta: float
    z: np.ndarray
    x_perp: np.ndarray
    lhs: float
    rhs: float
    degenerate: bool

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + CERT_RTOL)


def make_ensemble(
    rng: RngStream,
    n: int,
    N: int,
    x0_mode: str = "random_unit",
    x0: Optional[np.ndarray] = None
) -> MeasurementEnsemble:
    """
    Sample A with i.i.d. complex Gaussian entries and form the data.

    Args:
        rng: Random stream; A is drawn first, then x0 when random
        n: Signal dimension
        N: Number of measurements, at least 2n
        x0_mode: 'random_unit' (uniform on the unit sphere) or 'given'
        x0: Signal to use when x0_mode is 'given'

    Returns:
        MeasurementEnsemble
    """
    if n < 1 or N < 2 * n:
        raise ContractViolation(f"Need n >= 1 and N >= 2n, got n={n}, N={N}")

    gen = rng.generator()
    A = sample_complex_gaussian(gen, n, N)

    if x0_mode == "random_unit":
        signal = sample_complex_gaussian(gen, n, 1)[:, 0]
        signal = signal / np.linalg.norm(signal)
    elif x0_mode == "given":
        if x0 is None:
            raise ContractViolation("x0_mode 'given' requires x0")
        signal = np.asarray(x0, dtype=complex).reshape(-1)
        if signal.shape != (n,):
            raise ContractViolation(f"x0 must have length {n}, got {signal.shape[0]}")
        if not np.linalg.norm(signal) > 0.0:
            raise ContractViolation("x0 must be nonzero")
    else:
        raise ContractViolation(f"Unknown x0_mode '{x0_mode}'")

    y = A.conj().T @ signal
    return MeasurementEnsemble(A=_frozen(A), x0=_frozen(signal), y=_frozen(y), b=_frozen(np.abs(y)))


def weak_indices(b: np.ndarray, k: int) -> np.ndarray:
    """
    Indices of the k smallest entries of b; ties go to the lower index.

    Args:
        b: Nonnegative magnitudes
        k: Number of indices, 0 < k < len(b)

    Returns:
        Ascending index array of length k
    """
    b = np.asarray(b)
    if not 0 < k < b.shape[0]:
        raise ContractViolation(f"Weak set size must lie in (0, {b.shape[0]}), got {k}")
    order = np.argsort(b, kind="stable")
    return np.sort(order[:k])


def select_weak(ensemble: MeasurementEnsemble, I_size: int) -> IndexSplit:
    """
    Split measurements into the I_size weakest and the rest.

    Args:
        ensemble: Measurement ensemble
        I_size: Size of the weak set, n < I_size < N

    Returns:
        IndexSplit
    """
    n, N = ensemble.n, ensemble.N
    if not n < I_size < N:
        raise ContractViolation(f"I_size must satisfy n < I_size < N ({n} < {I_size} < {N})")
    I = weak_indices(ensemble.b, I_size)
    I_c = np.setdiff1d(np.arange(N), I, assume_unique=True)
    return IndexSplit(I=_frozen(I), I_c=_frozen(I_c), sigma=I_size / N)


def error_sq(x0: np.ndarray, x_hat: np.ndarray) -> float:
    """
    Phase-invariant error ‖x0 x0* − x_hat x_hat*‖_F² = 2‖x0‖⁴ − 2|x0* x_hat|².

    Args:
        x0: True signal
        x_hat: Estimate with ‖x_hat‖ = ‖x0‖

    Returns:
        Squared projector error
    """
    norm0 = float(np.linalg.norm(x0))
    norm_hat = float(np.linalg.norm(x_hat))
    if abs(norm_hat - norm0) > NORM_RTOL * norm0:
        raise ContractViolation(f"Norm mismatch: ‖x_hat‖={norm_hat!r}, ‖x0‖={norm0!r}")
    inner = abs(np.vdot(x0, x_hat))
    return max(2.0 * norm0 ** 4 - 2.0 * inner ** 2, 0.0)


def _make_estimate(
    method: str,
    x0: np.ndarray,
    direction: np.ndarray,
    iterations: int,
    eigenvalue: float
) -> Estimate:
    norm0 = float(np.linalg.norm(x0))
    x_hat = norm0 * direction
    inner = float(abs(np.vdot(x0, x_hat)))
    err = error_sq(x0, x_hat)
    rel = float(np.sqrt(max(2.0 - 2.0 * inner / norm0 ** 2, 0.0)))
    return Estimate(
        method=method,
        x_hat=_frozen(x_hat),
        align_inner=inner,
        err_sq=err,
        rel_err=rel,
        iterations=int(iterations),
        eigenvalue=float(eigenvalue)
    )


def _hermitize(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + g.conj().T)


def null_vector(
    ensemble: MeasurementEnsemble,
    split: IndexSplit,
    dense_max: int = DENSE_MAX
) -> Estimate:
    """
    Null vector: ‖x0‖ times the smallest eigenvector of A_I A_I*.

    Args:
        ensemble: Measurement ensemble
        split: Weak/strong split of the same ensemble
        dense_max: Largest order solved densely

    Returns:
        Estimate with method 'null'
    """
    if split.I.shape[0] + split.I_c.shape[0] != ensemble.N:
        raise ContractViolation("Split does not partition the ensemble's measurements")
    if split.size <= ensemble.n:
        raise ContractViolation(f"Need |I| > n, got |I|={split.size}, n={ensemble.n}")

    A_I = ensemble.A[:, split.I]
    gram = _hermitize(A_I @ A_I.conj().T)
    lam, v, iterations = hermitian_eig_smallest(gram, dense_max=dense_max)
    logger.debug(f"Null vector: smallest eigenvalue {lam:.6g}, |I|={split.size}")
    return _make_estimate("null", ensemble.x0, v, iterations, lam)


def spectral_vector(
    ensemble: MeasurementEnsemble,
    weights: Optional[np.ndarray] = None
) -> Estimate:
    """
    Spectral vector: ‖x0‖ times the leading eigenvector of A diag(w) A*.

    Args:
        ensemble: Measurement ensemble
        weights: Per-measurement weights; defaults to b²

    Returns:
        Estimate with method 'spectral'
    """
    if weights is None:
        w = ensemble.b ** 2
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (ensemble.N,) or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractViolation("Weights must be finite, nonnegative and of length N")

    gram = _hermitize((ensemble.A * w) @ ensemble.A.conj().T)
    lam, v, iterations = hermitian_eig_largest(gram)
    logger.debug(f"Spectral vector: leading eigenvalue {lam:.6g} after {iterations} iterations")
    return _make_estimate("spectral", ensemble.x0, v, iterations, lam)


def _orthogonal_unit(u: np.ndarray) -> np.ndarray:
    # Gram-Schmidt of e_1 against u, falling back to e_2
    n = u.shape[0]
    for k in range(min(n, 2)):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        z = e - u * np.vdot(u, e)
        norm = np.linalg.norm(z)
        if norm > 1e-6:
            return z / norm
    return np.zeros(n, dtype=complex)


def certify_estimate(
    ensemble: MeasurementEnsemble,
    split: IndexSplit,
    estimate: Estimate
) -> Certificate:
    """
    Build β, z and x_⊥ for a null estimate and evaluate both sides of
    ¼‖x0 x0* − x_null x_null*‖² ≤ ‖b_I‖² / ‖A_I* x_⊥‖².

    The left side is taken on the unit-normalized problem; the right side is
    scale invariant. x_perp is returned with ‖x_perp‖ = ‖x0‖.

    Args:
        ensemble: Measurement ensemble
        split: Split used for the estimate
        estimate: Null vector estimate

    Returns:
        Certificate
    """
    if estimate.method != "null":
        raise ContractViolation(f"Certificate needs a null estimate, got '{estimate.method}'")

    scale = ensemble.x0_norm
    u0 = ensemble.x0 / scale
    un = estimate.x_hat / np.linalg.norm(estimate.x_hat)

    inner = np.vdot(u0, un)
    if abs(inner) > 0.0:
        # optimal phase: x0* x_null real nonnegative
        un = un * (np.conj(inner) / abs(inner))
    beta = float(min(abs(inner), 1.0))

    n = ensemble.n
    residual = u0 - beta * un
    # second pass keeps z orthogonal to x_null when the residual is tiny
    residual = residual - un * np.vdot(un, residual)
    s_perp = float(np.linalg.norm(residual))
    if n == 1:
        z = np.zeros(1, dtype=complex)
        s_perp = 0.0
    elif s_perp > 1e-12:
        z = residual / s_perp
    else:
        z = _orthogonal_unit(un)
        s_perp = 0.0

    x_perp = scale * (-s_perp * un + beta * z)
    if n == 1:
        x_perp = np.zeros(1, dtype=complex)

    lhs = estimate.err_sq / (4.0 * scale ** 4)
    A_I = ensemble.A[:, split.I]
    num = float(np.sum(ensemble.b[split.I] ** 2))
    den = float(np.linalg.norm(A_I.conj().T @ x_perp) ** 2)

    degenerate = den == 0.0
    rhs = np.inf if degenerate else num / den
    cert = Certificate(
        beta=beta, z=_frozen(z), x_perp=_frozen(x_perp), lhs=float(lhs), rhs=float(rhs),
        degenerate=degenerate
    )
    if not cert.holds:
        logger.warning(f"Certificate violated: lhs={cert.lhs:.17g} > rhs={cert.rhs:.17g}")
    return cert


def rotated_subcolumns(ensemble: MeasurementEnsemble, split: IndexSplit) -> np.ndarray:
    """
    A' = (A_I* Q) with its first column deleted, where Q e_1 = x0/‖x0‖.

    Args:
        ensemble: Measurement ensemble
        split: Weak/strong split

    Returns:
        Complex matrix of shape (|I|, n − 1)
    """
    q = unitary_with_first_column(ensemble.x0)
    rotated = ensemble.A[:, split.I].conj().T @ q
    return rotated[:, 1:]
