"""Tests for seeded sampling and the Hermitian eigensolvers."""

import numpy as np
import pytest

from conftest import projector_distance, psd_with_spectrum
from phasecore.errors import ContractViolation, ConvergenceError
from phasecore.linalg import (
    RngStream,
    _start_vector,
    canonical_phase,
    hermitian_eig_largest,
    hermitian_eig_smallest,
    sample_complex_gaussian,
    unitary_with_first_column,
)


class TestRngStream:

    def test_same_key_same_samples(self):
        a = sample_complex_gaussian(RngStream(7), 1, 1)
        b = sample_complex_gaussian(RngStream(7), 1, 1)
        assert a.shape == (1, 1)
        assert a[0, 0] == b[0, 0]

    def test_seed_sensitivity(self):
        a = sample_complex_gaussian(RngStream(7), 2, 2)
        b = sample_complex_gaussian(RngStream(8), 2, 2)
        assert not np.array_equal(a, b)

    def test_streams_are_distinct(self):
        a = RngStream(7, 0).generator().standard_normal(4)
        b = RngStream(7, 1).generator().standard_normal(4)
        assert not np.array_equal(a, b)

    def test_child_shifts_stream(self):
        child = RngStream(5, 3).child(4)
        assert child == RngStream(5, 7)

    @pytest.mark.parametrize("seed", [-1, 2 ** 64, 1.5])
    def test_rejects_invalid_seed(self, seed):
        with pytest.raises(ContractViolation):
            RngStream(seed)


class TestSampleComplexGaussian:

    def test_second_moment(self):
        a = sample_complex_gaussian(RngStream(7), 64, 4096)
        assert a.shape == (64, 4096)
        assert abs(np.mean(np.abs(a) ** 2) - 2.0) < 0.05

    def test_rejects_empty(self):
        with pytest.raises(ContractViolation):
            sample_complex_gaussian(RngStream(0), 0, 3)

    def test_accepts_running_generator(self):
        gen = RngStream(3).generator()
        first = sample_complex_gaussian(gen, 2, 2)
        second = sample_complex_gaussian(gen, 2, 2)
        assert not np.array_equal(first, second)


class TestHelpers:

    def test_canonical_phase(self):
        v = np.array([0.1j, -2.0 + 0j, 1.0])
        out = canonical_phase(v)
        assert out[1] == pytest.approx(2.0)
        assert out[1].imag == 0.0
        assert np.allclose(np.abs(out), np.abs(v))

    def test_canonical_phase_zero(self):
        assert np.array_equal(canonical_phase(np.zeros(3)), np.zeros(3))

    def test_unitary_with_first_column(self):
        x = np.array([1.0 + 1j, 2.0, -0.5j, 0.0])
        q = unitary_with_first_column(x)
        assert np.allclose(q.conj().T @ q, np.eye(4), atol=1e-12)
        assert np.allclose(q[:, 0], x / np.linalg.norm(x), atol=1e-12)

    def test_unitary_rejects_zero(self):
        with pytest.raises(ContractViolation):
            unitary_with_first_column(np.zeros(3))


class TestSmallestEigenpair:

    @pytest.mark.parametrize("dense_max", [512, 0])
    def test_identity(self, dense_max):
        lam, v, _ = hermitian_eig_smallest(np.eye(2), dense_max=dense_max)
        assert lam == pytest.approx(1.0)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    @pytest.mark.parametrize("dense_max", [512, 0])
    def test_diagonal(self, dense_max):
        lam, v, _ = hermitian_eig_smallest(np.diag([3.0, 1.0]), dense_max=dense_max)
        assert lam == pytest.approx(1.0)
        assert abs(v[1]) == pytest.approx(1.0)

    def test_zero_matrix(self):
        lam, v, iterations = hermitian_eig_smallest(np.zeros((3, 3)))
        assert lam == 0.0 and iterations == 0
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ContractViolation):
            hermitian_eig_smallest(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_indefinite_on_iterative_path(self):
        with pytest.raises(ContractViolation):
            hermitian_eig_smallest(-np.eye(3), dense_max=0)


class TestLargestEigenpair:

    def test_diagonal(self):
        lam, v, _ = hermitian_eig_largest(np.diag([3.0, 1.0]))
        assert lam == pytest.approx(3.0)
        assert abs(v[0]) == pytest.approx(1.0)

    def test_identity(self):
        lam, _, _ = hermitian_eig_largest(np.eye(2))
        assert lam == pytest.approx(1.0)

    def test_iteration_cap(self):
        g = psd_with_spectrum(1, np.array([1.0, 0.99, 0.5, 0.1]))
        with pytest.raises(ConvergenceError) as info:
            hermitian_eig_largest(g, max_iter=2)
        assert info.value.iterations == 2
        assert info.value.residual > 0


class TestDenseOracle:
    """Iterative and dense paths against numpy's full decomposition."""

    @pytest.mark.parametrize("seed", range(50))
    def test_smallest_matches_oracle(self, seed):
        n = 2 + seed % 63
        spectrum = np.concatenate([[0.1], np.linspace(1.0, 5.0, n - 1)])
        g = psd_with_spectrum(seed, spectrum)
        w, vecs = np.linalg.eigh(g)
        for dense_max in (512, 0):
            lam, v, _ = hermitian_eig_smallest(g, dense_max=dense_max)
            assert abs(lam - w[0]) <= 1e-8
            assert projector_distance(v, vecs[:, 0]) <= 1e-8

    @pytest.mark.parametrize("seed", range(50))
    def test_largest_matches_oracle(self, seed):
        n = 2 + seed % 63
        spectrum = np.concatenate([np.linspace(0.0, 5.0, n - 1), [10.0]])
        g = psd_with_spectrum(1000 + seed, spectrum)
        w, vecs = np.linalg.eigh(g)
        lam, v, _ = hermitian_eig_largest(g)
        assert abs(lam - w[-1]) <= 1e-8
        assert projector_distance(v, vecs[:, -1]) <= 1e-8

    def test_random_gram_8x8(self):
        gen = np.random.default_rng(8)
        a = gen.standard_normal((8, 40)) + 1j * gen.standard_normal((8, 40))
        g = a @ a.conj().T
        g = 0.5 * (g + g.conj().T)
        w, vecs = np.linalg.eigh(g)
        lam, v, _ = hermitian_eig_largest(g)
        assert abs(lam - w[-1]) <= 1e-8 * w[-1]
        assert projector_distance(v, vecs[:, -1]) <= 1e-8
        lam, v, _ = hermitian_eig_smallest(g, dense_max=0)
        assert abs(lam - w[0]) <= 1e-8 * w[-1]
        assert projector_distance(v, vecs[:, 0]) <= 1e-8


def _orthogonal_unit(v, seed):
    gen = np.random.default_rng(seed)
    w = gen.standard_normal(v.shape[0]) + 1j * gen.standard_normal(v.shape[0])
    w = w - v * np.vdot(v, w)
    return w / np.linalg.norm(w)


class TestStartVectorOnWrongEigenvector:
    """The start vector is itself an eigenvector, but not the one sought."""

    def test_largest_recovers_top_eigenvalue(self):
        v = _start_vector(3)
        u = _orthogonal_unit(v, 1)
        g = 3.0 * np.outer(u, u.conj()) + np.outer(v, v.conj())
        lam, x, _ = hermitian_eig_largest(g)
        assert lam == pytest.approx(3.0, rel=1e-9)
        assert projector_distance(x, u) <= 1e-8

    def test_smallest_recovers_bottom_eigenvalue(self):
        v = _start_vector(2)
        u = _orthogonal_unit(v, 2)
        g = np.outer(u, u.conj()) + 3.0 * np.outer(v, v.conj())
        lam, x, _ = hermitian_eig_smallest(g, dense_max=0)
        assert lam == pytest.approx(1.0, rel=1e-9)
        assert projector_distance(x, u) <= 1e-8

    def test_smallest_with_degenerate_bottom(self):
        v = _start_vector(4)
        g = np.eye(4) + 2.0 * np.outer(v, v.conj())
        lam, x, _ = hermitian_eig_smallest(g, dense_max=0)
        assert lam == pytest.approx(1.0, rel=1e-9)
        assert np.linalg.norm(g @ x - x) <= 1e-8

    @pytest.mark.parametrize("seed", [0, 1, 12345])
    def test_result_independent_of_start_seed(self, seed):
        g = psd_with_spectrum(3, np.array([4.0, 2.0, 1.0, 0.5]))
        w, vecs = np.linalg.eigh(g)
        lam, x, _ = hermitian_eig_largest(g, seed=seed)
        assert abs(lam - w[-1]) <= 1e-8
        assert projector_distance(x, vecs[:, -1]) <= 1e-8
        lam, x, _ = hermitian_eig_smallest(g, dense_max=0, seed=seed)
        assert abs(lam - w[0]) <= 1e-8
        assert projector_distance(x, vecs[:, 0]) <= 1e-8
