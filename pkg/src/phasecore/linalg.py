"""
Linalg Module
Deterministic complex dense linear algebra kernels and seeded sampling.

Complex normal convention: real and imaginary parts are each standard normal,
so E|a|² = 2 and |a* x0|² with ‖x0‖ = 1 has density e^{-z/2}/2.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np
from scipy import linalg as sla

from .errors import ContractViolation, ConvergenceError

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-10
RESIDUAL_RTOL = 1e-9
PROJECTOR_TOL = 1e-10
MAX_ITER = 100_000
DENSE_MAX = 512
CHOLESKY_SHIFT = 1e-12
START_SEED = 0

_UINT64 = 2 ** 64


@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream keyed by (master_seed, stream_id).

    Identical keys reproduce identical samples on every platform.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < _UINT64:
                raise ContractViolation(f"{name} must be a 64-bit unsigned integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        """Fresh Philox generator positioned at the start of this stream."""
        key = int(self.master_seed) + (int(self.stream_id) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "RngStream":
        """Stream with the same master seed, shifted stream id."""
        return RngStream(self.master_seed, (int(self.stream_id) + int(offset)) % _UINT64)


RandomSource = Union[RngStream, np.random.Generator]


def _as_generator(rng: RandomSource) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def sample_complex_gaussian(rng: RandomSource, rows: int, cols: int) -> np.ndarray:
    """
    Sample a rows × cols matrix with i.i.d. N(0,1) + iN(0,1) entries.

    Args:
        rng: RngStream (a fresh generator is started) or a running Generator
        rows: Number of rows, at least 1
        cols: Number of columns, at least 1

    Returns:
        Complex matrix of shape (rows, cols)
    """
    if rows < 1 or cols < 1:
        raise ContractViolation(f"Dimensions must be positive, got {rows}x{cols}")
    gen = _as_generator(rng)
    real = gen.standard_normal((rows, cols))
    imag = gen.standard_normal((rows, cols))
    return real + 1j * imag


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """
    Rotate v so its largest-magnitude entry is real nonnegative.

    Args:
        v: Complex vector

    Returns:
        Rotated copy of v
    """
    v = np.asarray(v, dtype=complex).copy()
    if v.size == 0:
        return v
    k = int(np.argmax(np.abs(v)))
    mag = abs(v[k])
    if mag == 0.0:
        return v
    v *= np.conj(v[k]) / mag
    v[k] = mag
    return v


def unitary_with_first_column(x: np.ndarray) -> np.ndarray:
    """
    Build a unitary Q with Q e_1 = x / ‖x‖.

    Args:
        x: Nonzero complex vector

    Returns:
        Unitary matrix of shape (len(x), len(x))
    """
    x = np.asarray(x, dtype=complex)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ContractViolation("Cannot rotate onto a zero vector")
    n = x.shape[0]
    m = np.eye(n, dtype=complex)
    m[:, 0] = x / norm
    q, r = np.linalg.qr(m)
    # Q[:, 0] * R[0, 0] equals the first column of m
    q[:, 0] *= r[0, 0]
    return q


def _check_hermitian(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
        raise ContractViolation(f"Expected a nonempty square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ContractViolation("Matrix has non-finite entries")
    scale = np.linalg.norm(g)
    if np.linalg.norm(g - g.conj().T) > HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
        raise ContractViolation("Matrix is not Hermitian to relative tolerance 1e-10")
    return g


def _start_vector(n: int, seed: int = START_SEED) -> np.ndarray:
    gen = np.random.default_rng(seed)
    v = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    return v / np.linalg.norm(v)


def _basis_vector(n: int, k: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[k] = 1.0
    return e


def _sin_angle(v: np.ndarray, w: np.ndarray) -> float:
    # Orthogonal component of w against unit v; stays accurate far below sqrt(eps)
    return float(np.linalg.norm(w - v * np.vdot(v, w)))


def _rayleigh(g: np.ndarray, v: np.ndarray) -> Tuple[float, float]:
    gv = g @ v
    lam = float(np.vdot(v, gv).real)
    return lam, float(np.linalg.norm(gv - lam * v))


def _zero_pair(n: int) -> Tuple[float, np.ndarray, int]:
    return 0.0, _basis_vector(n, 0), 0


def _iterate(
    step: Callable[[np.ndarray, int], np.ndarray],
    g: np.ndarray,
    v: np.ndarray,
    scale: float,
    tol: float,
    max_iter: int,
    label: str
) -> Tuple[float, np.ndarray, int]:
    """
    Apply step until the projector change is below tol and the residual is small.

    Args:
        step: Maps (iterate, iteration number) to the next unnormalized iterate
        g: Matrix whose eigenpair is sought
        v: Unit start vector
        scale: Frobenius norm of g
        tol: Projector-change tolerance
        max_iter: Iteration cap
        label: Method name used in log and error messages

    Returns:
        Tuple of (Rayleigh quotient, unit iterate, iterations)
    """
    for it in range(1, max_iter + 1):
        w = step(v, it)
        w = w / np.linalg.norm(w)
        change = np.sqrt(2.0) * _sin_angle(v, w)
        v = w
        if change < tol:
            lam, residual = _rayleigh(g, v)
            if residual <= RESIDUAL_RTOL * scale:
                logger.debug(f"{label} converged in {it} iterations")
                return lam, v, it

    _, residual = _rayleigh(g, v)
    raise ConvergenceError(f"{label} did not converge", residual, max_iter)


def hermitian_eig_largest(
    g: np.ndarray,
    tol: float = PROJECTOR_TOL,
    max_iter: int = MAX_ITER,
    seed: int = START_SEED
) -> Tuple[float, np.ndarray, int]:
    """
    Largest eigenpair of a Hermitian PSD matrix by power iteration.

    Starts from a seeded random vector and stops once the projector change
    between iterates is below tol and the residual ‖G v − λ v‖ is at most
    1e-9 ‖G‖_F. A converged value below the largest diagonal entry of G is
    not the top of the spectrum; the iteration then restarts from the basis
    vector at that diagonal entry.

    Args:
        g: Hermitian positive semidefinite matrix
        tol: Projector-change tolerance
        max_iter: Iteration cap for each start
        seed: Seed of the random start vector

    Returns:
        Tuple of (eigenvalue, unit eigenvector in canonical phase, iterations)

    Raises:
        ContractViolation: If g is not Hermitian
        ConvergenceError: If the cap is reached
    """
    g = _check_hermitian(g)
    n = g.shape[0]
    scale = float(np.linalg.norm(g))
    if scale == 0.0:
        return _zero_pair(n)

    def step(v: np.ndarray, it: int) -> np.ndarray:
        w = g @ v
        if np.linalg.norm(w) == 0.0:
            # iterate fell in the null space; restart on a basis vector
            return _basis_vector(n, it % n)
        return w

    diag = np.real(np.diag(g))
    lam, v, iterations = _iterate(
        step, g, _start_vector(n, seed), scale, tol, max_iter, "Power iteration"
    )
    if lam < diag.max() - RESIDUAL_RTOL * scale:
        k = int(np.argmax(diag))
        logger.warning(
            f"Power iteration settled at {lam:.6g} below diagonal entry {diag[k]:.6g}; "
            f"restarting from e_{k}"
        )
        lam, v, more = _iterate(
            step, g, _basis_vector(n, k), scale, tol, max_iter, "Power iteration"
        )
        iterations += more
    return lam, canonical_phase(v), iterations


def hermitian_eig_smallest(
    g: np.ndarray,
    dense_max: int = DENSE_MAX,
    tol: float = PROJECTOR_TOL,
    max_iter: int = MAX_ITER,
    seed: int = START_SEED
) -> Tuple[float, np.ndarray, int]:
    """
    Smallest eigenpair of a Hermitian PSD matrix.

    Uses a dense Hermitian eigendecomposition when the order is at most
    dense_max, otherwise inverse iteration on the Cholesky factor of
    G + 1e-12 · trace(G)/n · I from a seeded random start. A converged value
    above the smallest diagonal entry of G restarts the inverse iteration
    from the basis vector at that entry.

    Args:
        g: Hermitian positive semidefinite matrix
        dense_max: Largest order solved densely
        tol: Projector-change tolerance for inverse iteration
        max_iter: Iteration cap for each start of inverse iteration
        seed: Seed of the random start vector

    Returns:
        Tuple of (eigenvalue, unit eigenvector in canonical phase, iterations)

    Raises:
        ContractViolation: If g is not Hermitian or not positive semidefinite
        ConvergenceError: If the cap is reached
    """
    g = _check_hermitian(g)
    n = g.shape[0]
    scale = float(np.linalg.norm(g))
    if scale == 0.0:
        return _zero_pair(n)

    if n <= dense_max:
        w, vecs = sla.eigh(g, subset_by_index=[0, 0])
        v = vecs[:, 0]
        v = v / np.linalg.norm(v)
        return float(w[0]), canonical_phase(v), 0

    shift = CHOLESKY_SHIFT * float(np.trace(g).real) / n
    try:
        factor = sla.cho_factor(g + shift * np.eye(n), lower=False, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise ContractViolation(f"Matrix is not positive semidefinite: {e}") from e

    def step(v: np.ndarray, it: int) -> np.ndarray:
        return sla.cho_solve(factor, v, check_finite=False)

    diag = np.real(np.diag(g))
    lam, v, iterations = _iterate(
        step, g, _start_vector(n, seed), scale, tol, max_iter, "Inverse iteration"
    )
    if lam > diag.min() + RESIDUAL_RTOL * scale:
        k = int(np.argmin(diag))
        logger.warning(
            f"Inverse iteration settled at {lam:.6g} above diagonal entry {diag[k]:.6g}; "
            f"restarting from e_{k}"
        )
        lam, v, more = _iterate(
            step, g, _basis_vector(n, k), scale, tol, max_iter, "Inverse iteration"
        )
        iterations += more
    return lam, canonical_phase(v), iterations
