"""Vectorized numpy step kernels (fallback backend).

Both backends expose the same two entry points:

    run_pd_batch(rho0, omega, kappa_eff, dt, jumps, sample_steps, want_tangent)
    run_hd_batch(rho0, omega, kappa, eta, theta, dt, dw, sample_steps,
                 want_tangent, want_current)

and integrate a batch of trajectories that share the initial state but have
independent noise.  Every quantity is per-trajectory; batching never mixes
trajectories, so results are independent of how a run is chunked.

Photo-detection step (counting unravelling)
-------------------------------------------
One Euler step = smooth propagator at the *reduced* coupling (1-eta)*kappa,
applied elementwise as exp(-i*omega*dt*(h_m-h_n) - (1-eta)*kappa*dt*d_H),
followed by a sign conjugation sz_j . sz_j for every channel j that clicked
(dN_j = 1).  The diagonal is untouched, so the map is exactly trace
preserving and composing steps reproduces the closed-form propagator.

Homodyne step (diffusive unravelling, Kraus form)
-------------------------------------------------
With g = sqrt(eta*kappa/2) and the detector phase theta, one step applies

    M = 1 - (i*omega*J_z + kappa*N/4)*dt + g*e^{i*theta} * sum_j sz_j * dyi_j
    rho' propto M rho M^dag + (1-eta)*(kappa/2)*dt * sum_j sz_j rho sz_j

followed by trace renormalization.  dyi_j is the *filter-normalized* current

    dyi_j = dw_j + 2*g*cos(theta)*Tr[rho sz_j]*dt ,

i.e. the standard current for collapse operators sqrt(kappa/2)*sz_j at
efficiency eta.  Expanding M rho M^dag to first order in dt (with
dyi_j*dyi_k -> delta_jk*dt) and normalizing reproduces the diffusive
stochastic master equation

    d rho = -i[H, rho] dt + (kappa/2) sum_j D[sz_j] rho dt
            + g sum_j (e^{i*theta} sz_j rho + e^{-i*theta} rho sz_j
                       - 2 cos(theta) Tr[rho sz_j] rho) dw_j ;

the drift terms only cancel with this current normalization, and at eta = 0
the step reduces to the unconditional generator up to O(dt^2).  The current
*reported* to callers keeps the 2*sqrt(eta)*cos(theta)*Tr[rho sz_j]*dt mean
convention used everywhere else in the package; the two coincide at
theta = pi/2 where both equal dw.  cos(theta) is snapped to zero within
1e-12 so the pure-noise quadrature is exact in floating point.

Since all operators are diagonal, the step is elementwise:
    rho'_mn  propto  [M_m conj(M_n) + (1-eta)*(kappa/2)*dt*(N - 2 d_H(m,n))] rho_mn.

Frequency tangent and likelihood score
--------------------------------------
For Fisher-information estimates the kernels co-propagate T = d rho / d omega
of the normalized filter state at fixed measurement record:

    T' = [M T M^dag + feed(T) + Psi(rho)] / mu - Tr[...]/mu * rho',
    Psi(rho)_mn = -i*dt*(h_m conj(M_n) - M_m h_n) * rho_mn,

with mu the trace of the state update.  The log-likelihood score
s = Tr[d_omega rho_tilde]/Tr[rho_tilde] of the linear (unnormalized) filter
obeys the Ito identity ds = sum_j 2*g*cos(theta)*Tr[T sz_j]*dw_j, which is
how it is accumulated here (with the pre-step tangent); this keeps the
structural zeros exact: for photo-detection and for theta = pi/2 the record
statistics carry no frequency information and the accumulated score is
exactly 0.0.  For photo-detection the score is the (trace-preserved) tangent
trace, which stays identically zero step by step.
"""

import math

import numpy as np

from . import operators

BACKEND = "python"


def snapped_cos(theta: float) -> float:
    """cos(theta) with values within 1e-12 of zero snapped to exactly 0.0."""
    c = math.cos(theta)
    return 0.0 if abs(c) < 1e-12 else c


def _tables(n_qubits):
    zs = operators.pauli_z_signs(n_qubits)
    h = operators.jz_diagonal(n_qubits)
    d_h = operators.hamming_table(n_qubits).astype(np.float64)
    return zs, h, d_h


def _alloc_samples(n_batch, n_samples, dim, want_tangent):
    states = np.empty((n_batch, n_samples, dim, dim), dtype=np.complex128)
    tangents = (
        np.empty((n_batch, n_samples, dim, dim), dtype=np.complex128)
        if want_tangent
        else None
    )
    scores = np.zeros((n_batch, n_samples), dtype=np.float64) if want_tangent else None
    return states, tangents, scores


def run_pd_batch(rho0, omega, kappa_eff, dt, jumps, sample_steps, want_tangent=False):
    """Integrate photo-detection trajectories from pre-drawn click increments.

    jumps: (B, n_steps, N) 0/1 array; sample_steps: ascending step indices at
    which state (and tangent/score) snapshots are taken.
    """
    jumps = np.asarray(jumps)
    n_batch, n_steps, n_qubits = jumps.shape
    dim = 1 << n_qubits
    zs, h, d_h = _tables(n_qubits)
    dh_mat = h[:, None] - h[None, :]
    factor = np.exp(-1j * omega * dt * dh_mat - kappa_eff * dt * d_h)
    deriv = -1j * dt * dh_mat

    sample_steps = np.asarray(sample_steps, dtype=np.int64)
    states, tangents, scores = _alloc_samples(n_batch, sample_steps.size, dim, want_tangent)

    rho = np.broadcast_to(np.asarray(rho0, dtype=np.complex128), (n_batch, dim, dim)).copy()
    tan = np.zeros_like(rho) if want_tangent else None

    pos = 0
    if pos < sample_steps.size and sample_steps[pos] == 0:
        states[:, pos] = rho
        if want_tangent:
            tangents[:, pos] = tan
            scores[:, pos] = 0.0
        pos += 1

    for k in range(n_steps):
        rho *= factor
        clicked = jumps[:, k, :]
        if clicked.any():
            sgn = np.where(clicked[:, :, None] != 0, zs[None, :, :], 1.0).prod(axis=1)
            rho *= sgn[:, :, None]
            rho *= sgn[:, None, :]
        if want_tangent:
            tan *= factor
            if clicked.any():
                tan *= sgn[:, :, None]
                tan *= sgn[:, None, :]
            tan += deriv * rho
        if pos < sample_steps.size and sample_steps[pos] == k + 1:
            states[:, pos] = rho
            if want_tangent:
                tangents[:, pos] = tan
                # click statistics are state independent: the trace stays 0
                scores[:, pos] = np.einsum("bii->bi", tan).real.sum(axis=1)
            pos += 1
    return states, tangents, scores


def run_hd_batch(
    rho0,
    omega,
    kappa,
    eta,
    theta,
    dt,
    dw,
    sample_steps,
    want_tangent=False,
    want_current=False,
):
    """Integrate homodyne trajectories from pre-drawn Wiener increments.

    dw: (B, n_steps, N) increments with variance dt.  Returns
    (states, tangents, scores, currents); the current uses the reported
    normalization dy_j = dw_j + 2*sqrt(eta)*cos(theta)*Tr[rho sz_j]*dt.
    """
    dw = np.asarray(dw, dtype=np.float64)
    n_batch, n_steps, n_qubits = dw.shape
    dim = 1 << n_qubits
    zs, h, d_h = _tables(n_qubits)

    g = math.sqrt(eta * kappa / 2.0)
    cos_t = snapped_cos(theta)
    b = g * complex(cos_t, math.sin(theta))
    base = 1.0 - (1j * omega * h + kappa * n_qubits / 4.0) * dt
    feed = (1.0 - eta) * (kappa / 2.0) * dt * (n_qubits - 2.0 * d_h)
    cur_coef = 2.0 * g * cos_t * dt
    exp_coef = 2.0 * math.sqrt(eta) * cos_t * dt
    score_coef = 2.0 * g * cos_t
    h_row = h[None, :, None]
    h_col = h[None, None, :]

    sample_steps = np.asarray(sample_steps, dtype=np.int64)
    states, tangents, scores = _alloc_samples(n_batch, sample_steps.size, dim, want_tangent)
    currents = np.empty((n_batch, n_steps, n_qubits), dtype=np.float64) if want_current else None

    rho = np.broadcast_to(np.asarray(rho0, dtype=np.complex128), (n_batch, dim, dim)).copy()
    tan = np.zeros_like(rho) if want_tangent else None
    s_acc = np.zeros(n_batch, dtype=np.float64)

    pos = 0
    if pos < sample_steps.size and sample_steps[pos] == 0:
        states[:, pos] = rho
        if want_tangent:
            tangents[:, pos] = tan
            scores[:, pos] = s_acc
        pos += 1

    for k in range(n_steps):
        diag = np.einsum("bii->bi", rho).real
        expect = (diag[:, None, :] * zs[None, :, :]).sum(axis=2)  # Tr[rho sz_j]
        dwk = dw[:, k, :]
        dyi = dwk + cur_coef * expect
        if want_current:
            currents[:, k, :] = dwk + exp_coef * expect
        if want_tangent:
            tdiag = np.einsum("bii->bi", tan).real
            texp = (tdiag[:, None, :] * zs[None, :, :]).sum(axis=2)
            s_acc = s_acc + score_coef * (texp * dwk).sum(axis=1)
        m_vec = base[None, :] + b * (dyi[:, :, None] * zs[None, :, :]).sum(axis=1)
        gain = m_vec[:, :, None] * m_vec.conj()[:, None, :] + feed[None, :, :]
        new_rho = gain * rho
        mu = np.einsum("bii->bi", new_rho).real.sum(axis=1)
        if want_tangent:
            psi = -1j * dt * (h_row * m_vec.conj()[:, None, :] - m_vec[:, :, None] * h_col) * rho
            new_tan = gain * tan + psi
            tr_b = np.einsum("bii->bi", new_tan).real.sum(axis=1)
            rho = new_rho / mu[:, None, None]
            tan = new_tan / mu[:, None, None] - (tr_b / mu)[:, None, None] * rho
        else:
            rho = new_rho / mu[:, None, None]
        if pos < sample_steps.size and sample_steps[pos] == k + 1:
            states[:, pos] = rho
            if want_tangent:
                tangents[:, pos] = tan
                scores[:, pos] = s_acc
            pos += 1
    return states, tangents, scores, currents
