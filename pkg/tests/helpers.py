"""Shared test utilities."""

import numpy as np


def random_density_matrix(dim, rng, rank=None):
    """Ginibre-random density matrix of the given dimension."""
    rank = rank or dim
    a = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_traceless_hermitian(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (a + a.conj().T)
    return h - np.trace(h) * np.eye(dim) / dim
