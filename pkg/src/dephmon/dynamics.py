"""Unconditional dynamics: collective rotation plus independent dephasing.

The generator
    d rho / dt = -i omega [J_z, rho] + (kappa/2) sum_j (sz_j rho sz_j - rho)
is diagonal in the index-pair basis: entry (m, n) evolves independently as
    rho_mn(t) = rho_mn(0) * exp(-i omega t (h_m - h_n)) * exp(-kappa t d_H(m, n)),
with h_m the J_z eigenvalue of |m> and d_H the Hamming distance between the
basis indices.  The decay exponent kappa*d_H comes from
sum_j s_j(m) s_j(n) = N - 2 d_H(m, n); it is re-verified in the test suite
against a fixed-step RK4 integration of the matrix-form generator, which is
kept here as an independent oracle.
"""

from dataclasses import dataclass

import numpy as np

from . import operators
from .errors import StateInvariantError, TimeStepError


@dataclass(frozen=True)
class LindbladParams:
    """Physical parameters: qubit count, rotation frequency, dephasing rate."""

    n_qubits: int
    omega: float
    kappa: float

    def __post_init__(self):
        operators.hilbert_dim(self.n_qubits)
        if self.kappa < 0:
            raise StateInvariantError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def dephasing_factors(params: LindbladParams, t: float) -> np.ndarray:
    """Elementwise propagator exp(-i*omega*t*(h_m - h_n) - kappa*t*d_H(m,n))."""
    if t < 0:
        raise TimeStepError(f"negative evolution time t={t}")
    h = operators.jz_diagonal(params.n_qubits)
    d_h = operators.hamming_table(params.n_qubits).astype(np.float64)
    phase = h[:, None] - h[None, :]
    return np.exp(-1j * params.omega * t * phase - params.kappa * t * d_h)


def dephasing_map_exact(rho0: np.ndarray, params: LindbladParams, t: float) -> np.ndarray:
    """Exact solution rho(t) of the dephasing master equation (elementwise)."""
    return np.asarray(rho0, dtype=np.complex128) * dephasing_factors(params, t)


def omega_derivative(rho: np.ndarray, n_qubits: int, t: float) -> np.ndarray:
    """Frequency derivative of an evolved state, d rho / d omega = -i t (h_m - h_n) rho_mn.

    Valid for any state obtained from an omega-independent initial state by
    the elementwise propagator above (with arbitrary coupling) and/or by
    conjugation with omega-independent diagonal unitaries, since all those
    factors commute elementwise.  Covers the unconditional family, the
    noiseless rotation and the closed-form conditional states.
    """
    h = operators.jz_diagonal(n_qubits)
    return -1j * t * (h[:, None] - h[None, :]) * np.asarray(rho)


def lindblad_rhs(rho: np.ndarray, params: LindbladParams) -> np.ndarray:
    """Matrix-form generator, used only by the ODE oracle.

    Built from dense commutators and operator sandwiches on purpose, so that
    it shares no code with the elementwise fast path.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    dim = params.dim
    if rho.shape != (dim, dim):
        raise StateInvariantError(
            f"state shape {rho.shape} does not match N={params.n_qubits}"
        )
    h_op = params.omega * operators.collective_jz(params.n_qubits)
    out = -1j * (h_op @ rho - rho @ h_op)
    acc = np.zeros_like(rho)
    for j in range(1, params.n_qubits + 1):
        sz = operators.sigma_z(j, params.n_qubits)
        acc += sz @ rho @ sz
    out += 0.5 * params.kappa * (acc - params.n_qubits * rho)
    return out


@dataclass
class OdeResult:
    state: np.ndarray
    max_trace_drift: float
    n_steps: int


def propagate_ode(rho0: np.ndarray, params: LindbladParams, t: float, dt: float) -> OdeResult:
    """Fixed-step RK4 integration of lindblad_rhs (test oracle).

    Renormalizes whenever the trace drifts by more than 1e-12 and reports the
    largest drift seen.
    """
    if t < 0:
        raise TimeStepError(f"negative evolution time t={t}")
    rho = np.array(rho0, dtype=np.complex128)
    if t == 0:
        return OdeResult(rho, 0.0, 0)
    if dt <= 0 or dt > t:
        raise TimeStepError(f"need 0 < dt <= t, got dt={dt}, t={t}")
    n_steps = int(round(t / dt))
    step = t / n_steps  # lands exactly on t even when t/dt is not integral
    max_drift = 0.0
    for _ in range(n_steps):
        k1 = lindblad_rhs(rho, params)
        k2 = lindblad_rhs(rho + 0.5 * step * k1, params)
        k3 = lindblad_rhs(rho + 0.5 * step * k2, params)
        k4 = lindblad_rhs(rho + step * k3, params)
        rho = rho + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        drift = abs(np.trace(rho).real - 1.0)
        if drift > max_drift:
            max_drift = drift
        if drift > 1e-12:
            rho = rho / np.trace(rho).real
    return OdeResult(rho, max_drift, n_steps)
