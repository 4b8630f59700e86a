"""Fidelity, quantum Fisher information and Monte-Carlo Fisher estimates.

The figure of merit for continuous monitoring followed by a strong final
measurement is the *effective* QFI: the classical Fisher information of the
measurement record plus the record-averaged QFI of the conditional states.
It is sandwiched between the unconditional QFI and the ultimate QFI of the
joint system-environment state; since every collapse operator here commutes
with the Hamiltonian, the ultimate QFI equals the QFI of the noiseless
unitary evolution.

Record information is estimated as the mean of squared per-trajectory
log-likelihood scores; the score is co-propagated with the filter tangent in
the step kernels (see :mod:`dephmon._kernels_py`).  A finite-difference
log-likelihood oracle with common records is provided for cross-checks.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels, operators
from .dynamics import LindbladParams, dephasing_map_exact, omega_derivative
from .errors import ConfigError, StateInvariantError
from .trajectories import (
    DEFAULT_DT,
    HOMODYNE,
    PHOTO_DETECTION,
    closed_form_hd_batch,
    closed_form_pd_batch,
    simulate_batch,
)

EIG_CUTOFF = 1e-10  # SLD pair exclusion; smaller sums are 0/0 limits
DRHO_TOL = 1e-8


@dataclass(frozen=True)
class FisherEstimates:
    """Point estimates (with standard errors) of the Fisher quantities."""

    fi_traj: float
    fi_traj_stderr: float
    mean_conditional_qfi: float
    mean_conditional_qfi_stderr: float
    effective_qfi: float
    effective_qfi_stderr: float
    unconditional_qfi: float
    ultimate_qfi: float
    trajectories_used: int


def trace_distance(rho, sigma) -> float:
    """(1/2) * trace norm of rho - sigma."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def _psd_sqrt(rho) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if vals.min() < -operators.PSD_TOL:
        raise StateInvariantError(f"state has eigenvalue {vals.min():.3e} < -{operators.PSD_TOL}")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ||sqrt(rho) sqrt(sigma)||_1 via spectral square roots."""
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise StateInvariantError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    cross = _psd_sqrt(rho) @ _psd_sqrt(sigma)
    f = float(np.linalg.svd(cross, compute_uv=False).sum())
    return min(max(f, 0.0), 1.0)


def qfi_sld(rho, drho, eig_cutoff=EIG_CUTOFF) -> float:
    """QFI from the symmetric-logarithmic-derivative spectral formula.

    2 * sum over eigenpair (i, k) with lam_i + lam_k > cutoff of
    |<i|drho|k>|^2 / (lam_i + lam_k).
    """
    drho = np.asarray(drho)
    herm = np.max(np.abs(drho - drho.conj().T)) if drho.size else 0.0
    if herm > DRHO_TOL:
        raise StateInvariantError(f"drho not Hermitian: deviation {herm:.3e}")
    if abs(np.trace(drho)) > DRHO_TOL:
        raise StateInvariantError(f"drho not traceless: trace {np.trace(drho):.3e}")
    vals, vecs = np.linalg.eigh(0.5 * (np.asarray(rho) + np.asarray(rho).conj().T))
    mat = vecs.conj().T @ drho @ vecs
    sums = vals[:, None] + vals[None, :]
    mask = sums > eig_cutoff
    return float(2.0 * (np.abs(mat[mask]) ** 2 / sums[mask]).sum())


def qfi_fd_oracle(state_of, omega, eps) -> float:
    """Fidelity-based finite-difference QFI, 8*(1 - F[rho(w-e/2), rho(w+e/2)])/e^2.

    Test oracle; independent of the SLD route.
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    f = fidelity(state_of(omega - eps / 2.0), state_of(omega + eps / 2.0))
    return 8.0 * (1.0 - f) / eps**2


def unconditional_qfi(rho0, params: LindbladParams, t: float) -> float:
    """QFI of the unconditionally dephased state at time t (analytic derivative)."""
    state = dephasing_map_exact(rho0, params, t)
    return qfi_sld(state, omega_derivative(state, params.n_qubits, t))


def ultimate_qfi(rho0, params: LindbladParams, t: float) -> float:
    """Upper bound over all unravellings: QFI of the noiseless rotation.

    Valid because the collapse operators commute with the Hamiltonian;
    requires a pure initial state.
    """
    pur = operators.purity(rho0)
    if pur < 1.0 - 1e-9:
        raise StateInvariantError(f"ultimate QFI needs a pure state, purity {pur:.12f}")
    state = dephasing_map_exact(rho0, replace(params, kappa=0.0), t)
    return qfi_sld(state, omega_derivative(state, params.n_qubits, t))


def _hermitize(mat):
    return 0.5 * (mat + mat.conj().swapaxes(-1, -2))


def _conditional_states_and_derivs(rho0, params, unravelling, batch, si, t_s):
    """Per-trajectory conditional states and their frequency derivatives.

    Pure-noise records (pd, eta=0, theta=pi/2) admit exact closed-form
    states whose derivative is elementwise analytic; otherwise the
    step-integrated state and the co-propagated filter tangent are used.
    """
    if unravelling.is_pure_noise:
        cum = batch.cumulative[:, si, :]
        if unravelling.kind == PHOTO_DETECTION:
            states = closed_form_pd_batch(rho0, params, unravelling.eta, cum, t_s)
        else:
            # the conjugation phase follows sin(theta): theta = 3*pi/2 is the
            # same pure-noise quadrature with the record sign flipped
            sign = math.copysign(1.0, math.sin(unravelling.theta))
            states = closed_form_hd_batch(rho0, params, unravelling.eta, sign * cum, t_s)
        derivs = omega_derivative(states, params.n_qubits, t_s)
    else:
        states = batch.states[:, si]
        derivs = _hermitize(batch.tangents[:, si])
    return states, derivs


def fisher_time_series(
    rho0,
    params,
    unravelling,
    sample_times,
    n_traj,
    seed,
    dt=DEFAULT_DT,
    workers=1,
    return_samples=False,
):
    """Monte-Carlo Fisher estimates at each sample time.

    Returns a list of FisherEstimates (one per time); with
    return_samples=True also a dict holding the per-trajectory scores and
    conditional QFI arrays of shape (n_traj, n_times).  With a single
    trajectory the standard errors are reported as 0.
    """
    batch = simulate_batch(
        rho0,
        params,
        unravelling,
        sample_times,
        seed,
        n_traj,
        dt=dt,
        want_states=not unravelling.is_pure_noise,
        want_tangent=True,
        workers=workers,
    )
    n_times = batch.sample_times.size
    cond_qfi = np.empty((n_traj, n_times))
    rows = []

    def stderr(values):
        if n_traj < 2:
            return 0.0
        return float(values.std(ddof=1) / math.sqrt(n_traj))

    for si, t_s in enumerate(batch.sample_times):
        states, derivs = _conditional_states_and_derivs(
            rho0, params, unravelling, batch, si, t_s
        )
        for i in range(n_traj):
            cond_qfi[i, si] = qfi_sld(states[i], derivs[i])
        sq = batch.scores[:, si] ** 2
        q = cond_qfi[:, si]
        rows.append(
            FisherEstimates(
                fi_traj=float(sq.mean()),
                fi_traj_stderr=stderr(sq),
                mean_conditional_qfi=float(q.mean()),
                mean_conditional_qfi_stderr=stderr(q),
                effective_qfi=float(sq.mean() + q.mean()),
                effective_qfi_stderr=stderr(sq + q),
                unconditional_qfi=unconditional_qfi(rho0, params, t_s),
                ultimate_qfi=ultimate_qfi(rho0, params, t_s),
                trajectories_used=n_traj,
            )
        )
    if return_samples:
        return rows, {"scores": batch.scores, "conditional_qfi": cond_qfi}
    return rows


def effective_qfi(rho0, params, unravelling, t, n_traj, seed, dt=DEFAULT_DT, workers=1):
    """FisherEstimates at the single time t (record FI + mean conditional QFI)."""
    if n_traj < 2:
        raise ConfigError(f"need at least 2 trajectories, got {n_traj}")
    return fisher_time_series(
        rho0, params, unravelling, [t], n_traj, seed, dt=dt, workers=workers
    )[0]


def fi_trajectories(rho0, params, unravelling, t, n_traj, seed, dt=DEFAULT_DT, workers=1):
    """Monte-Carlo record Fisher information at time t: (estimate, stderr).

    Mean of squared per-trajectory log-likelihood scores.
    """
    if n_traj < 2:
        raise ConfigError(f"need at least 2 trajectories, got {n_traj}")
    batch = simulate_batch(
        rho0,
        params,
        unravelling,
        [t],
        seed,
        n_traj,
        dt=dt,
        want_states=False,
        want_tangent=True,
        workers=workers,
    )
    sq = batch.scores[:, -1] ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_traj))


def score_fd_oracle(rho0, params, unravelling, dw, dt, delta=1e-5):
    """Finite-difference log-likelihood score for one homodyne record.

    Replays the *observed* internal currents of the record dw through the
    unnormalized linear filter at omega +/- delta and differences the
    accumulated log trace.  Cross-check oracle for the co-propagated score;
    shares the Kraus step constants but none of the tangent machinery.
    """
    if unravelling.kind != HOMODYNE:
        raise ConfigError("the finite-difference score oracle is homodyne-only")
    dw = np.asarray(dw, dtype=np.float64)
    n = params.n_qubits
    zs = operators.pauli_z_signs(n)
    h = operators.jz_diagonal(n)
    d_h = operators.hamming_table(n).astype(np.float64)
    g = math.sqrt(unravelling.eta * params.kappa / 2.0)
    cos_t = kernels.snapped_cos(unravelling.theta)
    b = g * complex(cos_t, math.sin(unravelling.theta))
    feed = (1.0 - unravelling.eta) * (params.kappa / 2.0) * dt * (n - 2.0 * d_h)

    # pass 1: filter at the true omega to reconstruct the observed currents
    rho = np.array(rho0, dtype=np.complex128)
    observed = np.empty_like(dw)
    for k in range(dw.shape[0]):
        expect = zs @ rho.real.diagonal()
        observed[k] = dw[k] + 2.0 * g * cos_t * dt * expect
        m_vec = (
            1.0
            - (1j * params.omega * h + params.kappa * n / 4.0) * dt
            + b * (zs.T @ observed[k])
        )
        new_rho = (m_vec[:, None] * m_vec.conj()[None, :] + feed) * rho
        rho = new_rho / np.trace(new_rho).real

    def log_likelihood(omega):
        state = np.array(rho0, dtype=np.complex128)
        total = 0.0
        for k in range(dw.shape[0]):
            m_vec = (
                1.0 - (1j * omega * h + params.kappa * n / 4.0) * dt + b * (zs.T @ observed[k])
            )
            new_state = (m_vec[:, None] * m_vec.conj()[None, :] + feed) * state
            mu = np.trace(new_state).real
            total += math.log(mu)
            state = new_state / mu
        return total

    hi = log_likelihood(params.omega + delta)
    lo = log_likelihood(params.omega - delta)
    return (hi - lo) / (2.0 * delta)
