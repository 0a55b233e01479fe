"""Shared fixtures for the phasecore test suite."""

import numpy as np
import pytest

from phasecore.linalg import RngStream


def random_unitary(seed: int, n: int) -> np.ndarray:
    gen = np.random.default_rng(seed)
    z = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def psd_with_spectrum(seed: int, eigenvalues: np.ndarray) -> np.ndarray:
    """U diag(λ) U* for a random unitary U."""
    u = random_unitary(seed, len(eigenvalues))
    g = (u * eigenvalues) @ u.conj().T
    return 0.5 * (g + g.conj().T)


def projector_distance(v: np.ndarray, w: np.ndarray) -> float:
    v = v / np.linalg.norm(v)
    w = w / np.linalg.norm(w)
    return float(np.linalg.norm(np.outer(v, v.conj()) - np.outer(w, w.conj())))


@pytest.fixture
def stream():
    return RngStream(2024, 0)


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv("PHASECORE_SEED", raising=False)
