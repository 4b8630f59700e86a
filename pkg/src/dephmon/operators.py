"""N-qubit operator algebra and canonical initial states.

Everything acts on the 2^N-dimensional computational basis.  Bit convention,
fixed throughout the package: qubit 1 is the *most significant* bit of a
basis index, so basis index m assigns qubit j the bit (m >> (N - j)) & 1.

All Hamiltonian and collapse operators used here are diagonal in this basis;
the sign tables returned by :func:`pauli_z_signs` and the Hamming-distance
table of :func:`hamming_table` are the primitives the fast propagators are
built from.
"""

import functools

import numpy as np

from .errors import DimensionOverflowError, StateInvariantError

# Dense 2^N x 2^N complex matrices stay desk-scale up to N = 12 (4096^2).
N_MAX = 12

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


def hilbert_dim(n_qubits: int) -> int:
    """Dimension 2^N, guarding the dense-matrix limit."""
    if n_qubits < 1:
        raise StateInvariantError(f"need at least one qubit, got N={n_qubits}")
    if n_qubits > N_MAX:
        raise DimensionOverflowError(
            f"N={n_qubits} exceeds N_MAX={N_MAX} (dense 2^N x 2^N storage)"
        )
    return 1 << n_qubits


@functools.lru_cache(maxsize=None)
def _bit_table(n_qubits: int) -> np.ndarray:
    """(dim, N) array of bits; column j-1 holds qubit j's bit of each index."""
    dim = hilbert_dim(n_qubits)
    idx = np.arange(dim, dtype=np.int64)
    shifts = np.arange(n_qubits - 1, -1, -1, dtype=np.int64)
    bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    bits.setflags(write=False)
    return bits


@functools.lru_cache(maxsize=None)
def pauli_z_signs(n_qubits: int) -> np.ndarray:
    """(N, dim) float array with entry [j-1, m] = <m|sigma_z^(j)|m> = +/-1."""
    signs = (1.0 - 2.0 * _bit_table(n_qubits).T).astype(np.float64)
    signs.setflags(write=False)
    return signs


@functools.lru_cache(maxsize=None)
def jz_diagonal(n_qubits: int) -> np.ndarray:
    """(dim,) eigenvalues of the collective J_z: (N - 2*popcount(m)) / 2."""
    diag = 0.5 * pauli_z_signs(n_qubits).sum(axis=0)
    diag.setflags(write=False)
    return diag


@functools.lru_cache(maxsize=None)
def hamming_table(n_qubits: int) -> np.ndarray:
    """(dim, dim) uint8 table of Hamming distances between basis indices."""
    bits = _bit_table(n_qubits)
    table = (bits[:, None, :] != bits[None, :, :]).sum(axis=2).astype(np.uint8)
    table.setflags(write=False)
    return table


def sigma_z(j: int, n_qubits: int) -> np.ndarray:
    """Dense Pauli-z on qubit j (1-based, MSB convention) of N qubits."""
    hilbert_dim(n_qubits)
    if not 1 <= j <= n_qubits:
        raise StateInvariantError(f"qubit index j={j} outside 1..{n_qubits}")
    # stored dense for interface uniformity even though diagonal
    return np.diag(pauli_z_signs(n_qubits)[j - 1].astype(np.complex128))


def collective_jz(n_qubits: int) -> np.ndarray:
    """Dense collective spin J_z = (1/2) sum_j sigma_z^(j)."""
    return np.diag(jz_diagonal(n_qubits).astype(np.complex128))


def ghz_state(n_qubits: int) -> np.ndarray:
    """Projector onto (|0...0> + |1...1>)/sqrt(2)."""
    dim = hilbert_dim(n_qubits)
    rho = np.zeros((dim, dim), dtype=np.complex128)
    for m in (0, dim - 1):
        for n in (0, dim - 1):
            rho[m, n] = 0.5
    return rho


def product_plus_state(n_qubits: int) -> np.ndarray:
    """N-fold tensor power of |+><+|; every entry equals 2^-N."""
    dim = hilbert_dim(n_qubits)
    return np.full((dim, dim), 1.0 / dim, dtype=np.complex128)


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def validate_density_matrix(rho: np.ndarray, n_qubits: int | None = None) -> None:
    """Raise StateInvariantError unless rho is a valid density matrix.

    Checks shape, hermiticity (tol 1e-10), unit trace (tol 1e-10) and
    positivity (eigenvalues >= -1e-9).
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateInvariantError(f"density matrix must be square, got {rho.shape}")
    dim = rho.shape[0]
    if n_qubits is not None and dim != hilbert_dim(n_qubits):
        raise StateInvariantError(
            f"dimension {dim} does not match N={n_qubits} (expected {1 << n_qubits})"
        )
    elif n_qubits is None and dim & (dim - 1):
        raise StateInvariantError(f"dimension {dim} is not a power of two")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERM_TOL:
        raise StateInvariantError(f"hermiticity violated by {herm:.3e} > {HERM_TOL}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise StateInvariantError(f"trace {tr} deviates from 1 by more than {TRACE_TOL}")
    lo = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if lo < -PSD_TOL:
        raise StateInvariantError(f"negative eigenvalue {lo:.3e} < -{PSD_TOL}")
