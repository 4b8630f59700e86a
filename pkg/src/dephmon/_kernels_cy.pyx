# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled step kernels.

Same interface and step semantics as :mod:`dephmon._kernels_py`, which also
documents the integration schemes; this backend runs the per-trajectory
loops in C for the small Hilbert-space dimensions where numpy call overhead
dominates.
"""

import math

import numpy as np

cimport numpy as cnp

from . import operators
from ._kernels_py import snapped_cos

BACKEND = "cython"

cdef double complex MINUS_I = -1j


cdef void _record(double complex[:, ::1] rho, double complex[:, ::1] tan,
                  double complex[:, :, :, ::1] states,
                  double complex[:, :, :, ::1] tangents,
                  double[:, ::1] scores, Py_ssize_t b, Py_ssize_t pos,
                  int want_tangent) noexcept nogil:
    cdef Py_ssize_t d = rho.shape[0]
    cdef Py_ssize_t m, n
    cdef double tr = 0.0
    for m in range(d):
        for n in range(d):
            states[b, pos, m, n] = rho[m, n]
    if want_tangent:
        for m in range(d):
            for n in range(d):
                tangents[b, pos, m, n] = tan[m, n]
        for m in range(d):
            tr += tan[m, m].real
        scores[b, pos] = tr


def run_pd_batch(rho0, omega, kappa_eff, dt, jumps, sample_steps, want_tangent=False):
    """Photo-detection batch integrator; see the numpy backend docstring."""
    jumps_arr = np.ascontiguousarray(jumps, dtype=np.uint8)
    n_batch, n_steps, n_qubits = jumps_arr.shape
    dim = 1 << n_qubits
    zs = np.ascontiguousarray(operators.pauli_z_signs(n_qubits))
    h = np.ascontiguousarray(operators.jz_diagonal(n_qubits))
    d_h = operators.hamming_table(n_qubits).astype(np.float64)
    dh_mat = h[:, None] - h[None, :]
    factor = np.ascontiguousarray(np.exp(-1j * omega * dt * dh_mat - kappa_eff * dt * d_h))

    steps = np.ascontiguousarray(sample_steps, dtype=np.int64)
    n_samples = steps.size
    states = np.empty((n_batch, n_samples, dim, dim), dtype=np.complex128)
    if want_tangent:
        tangents = np.empty((n_batch, n_samples, dim, dim), dtype=np.complex128)
        scores = np.zeros((n_batch, n_samples), dtype=np.float64)
    else:
        tangents = np.empty((0, 0, 0, 0), dtype=np.complex128)
        scores = np.zeros((0, 0), dtype=np.float64)

    _pd_loop(
        np.ascontiguousarray(rho0, dtype=np.complex128),
        factor,
        zs,
        h,
        float(dt),
        jumps_arr,
        steps,
        states,
        tangents,
        scores,
        1 if want_tangent else 0,
    )
    if want_tangent:
        return states, tangents, scores
    return states, None, None


cdef void _pd_loop(const double complex[:, ::1] rho0, const double complex[:, ::1] factor,
                   const double[:, ::1] zs, const double[::1] h, double dt,
                   const unsigned char[:, :, ::1] jumps, const cnp.int64_t[::1] steps,
                   double complex[:, :, :, ::1] states,
                   double complex[:, :, :, ::1] tangents,
                   double[:, ::1] scores, int want_tangent):
    cdef Py_ssize_t n_batch = jumps.shape[0]
    cdef Py_ssize_t n_steps = jumps.shape[1]
    cdef Py_ssize_t n_qubits = jumps.shape[2]
    cdef Py_ssize_t dim = rho0.shape[0]
    cdef Py_ssize_t n_samples = steps.shape[0]
    cdef Py_ssize_t b, k, m, n, j, pos
    cdef int any_jump
    cdef double complex f, rnew
    cdef double complex deriv_scale = MINUS_I * dt

    work = np.empty((dim, dim), dtype=np.complex128)
    work_t = np.empty((dim, dim), dtype=np.complex128)
    sgn_arr = np.empty(dim, dtype=np.float64)
    cdef double complex[:, ::1] rho = work
    cdef double complex[:, ::1] tan = work_t
    cdef double[::1] sgn = sgn_arr

    with nogil:
        for b in range(n_batch):
            for m in range(dim):
                for n in range(dim):
                    rho[m, n] = rho0[m, n]
                    tan[m, n] = 0
            pos = 0
            if n_samples > 0 and steps[0] == 0:
                _record(rho, tan, states, tangents, scores, b, 0, want_tangent)
                pos = 1
            for k in range(n_steps):
                any_jump = 0
                for m in range(dim):
                    sgn[m] = 1.0
                for j in range(n_qubits):
                    if jumps[b, k, j]:
                        any_jump = 1
                        for m in range(dim):
                            sgn[m] *= zs[j, m]
                for m in range(dim):
                    for n in range(dim):
                        f = factor[m, n]
                        if any_jump:
                            f = f * (sgn[m] * sgn[n])
                        rnew = rho[m, n] * f
                        rho[m, n] = rnew
                        if want_tangent:
                            tan[m, n] = tan[m, n] * f + deriv_scale * (h[m] - h[n]) * rnew
                if pos < n_samples and steps[pos] == k + 1:
                    _record(rho, tan, states, tangents, scores, b, pos, want_tangent)
                    pos += 1


def run_hd_batch(rho0, omega, kappa, eta, theta, dt, dw, sample_steps,
                 want_tangent=False, want_current=False):
    """Homodyne batch integrator; see the numpy backend docstring."""
    dw_arr = np.ascontiguousarray(dw, dtype=np.float64)
    n_batch, n_steps, n_qubits = dw_arr.shape
    dim = 1 << n_qubits
    zs = np.ascontiguousarray(operators.pauli_z_signs(n_qubits))
    h = np.ascontiguousarray(operators.jz_diagonal(n_qubits))
    d_h = operators.hamming_table(n_qubits).astype(np.float64)

    g = math.sqrt(eta * kappa / 2.0)
    cos_t = snapped_cos(theta)
    b_coef = g * complex(cos_t, math.sin(theta))
    base = np.ascontiguousarray(1.0 - (1j * omega * h + kappa * n_qubits / 4.0) * dt)
    feed = np.ascontiguousarray((1.0 - eta) * (kappa / 2.0) * dt * (n_qubits - 2.0 * d_h))

    steps = np.ascontiguousarray(sample_steps, dtype=np.int64)
    n_samples = steps.size
    states = np.empty((n_batch, n_samples, dim, dim), dtype=np.complex128)
    if want_tangent:
        tangents = np.empty((n_batch, n_samples, dim, dim), dtype=np.complex128)
        scores = np.zeros((n_batch, n_samples), dtype=np.float64)
    else:
        tangents = np.empty((0, 0, 0, 0), dtype=np.complex128)
        scores = np.zeros((0, 0), dtype=np.float64)
    if want_current:
        currents = np.empty((n_batch, n_steps, n_qubits), dtype=np.float64)
    else:
        currents = np.empty((0, 0, 0), dtype=np.float64)

    _hd_loop(
        np.ascontiguousarray(rho0, dtype=np.complex128),
        base,
        feed,
        zs,
        h,
        float(dt),
        b_coef,
        2.0 * g * cos_t * dt,
        2.0 * math.sqrt(eta) * cos_t * dt,
        2.0 * g * cos_t,
        dw_arr,
        steps,
        states,
        tangents,
        scores,
        currents,
        1 if want_tangent else 0,
        1 if want_current else 0,
    )
    return (
        states,
        tangents if want_tangent else None,
        scores if want_tangent else None,
        currents if want_current else None,
    )


cdef void _hd_loop(const double complex[:, ::1] rho0, const double complex[::1] base,
                   const double[:, ::1] feed, const double[:, ::1] zs, const double[::1] h,
                   double dt, double complex b_coef, double cur_coef,
                   double exp_coef, double score_coef,
                   const double[:, :, ::1] dw, const cnp.int64_t[::1] steps,
                   double complex[:, :, :, ::1] states,
                   double complex[:, :, :, ::1] tangents,
                   double[:, ::1] scores,
                   double[:, :, ::1] currents,
                   int want_tangent, int want_current):
    cdef Py_ssize_t n_batch = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    cdef Py_ssize_t n_qubits = dw.shape[2]
    cdef Py_ssize_t dim = rho0.shape[0]
    cdef Py_ssize_t n_samples = steps.shape[0]
    cdef Py_ssize_t b, k, m, n, j, pos
    cdef double expect, texpect, ds, mu, tr_b, s_acc, acc, inv_mu, ratio
    cdef double complex gain, psi, mvm
    cdef double complex deriv_scale = MINUS_I * dt

    work = np.empty((dim, dim), dtype=np.complex128)
    work_t = np.empty((dim, dim), dtype=np.complex128)
    work_a = np.empty((dim, dim), dtype=np.complex128)
    work_b = np.empty((dim, dim), dtype=np.complex128)
    mv_arr = np.empty(dim, dtype=np.complex128)
    dyi_arr = np.empty(n_qubits, dtype=np.float64)
    cdef double complex[:, ::1] rho = work
    cdef double complex[:, ::1] tan = work_t
    cdef double complex[:, ::1] upd = work_a
    cdef double complex[:, ::1] upd_t = work_b
    cdef double complex[::1] m_vec = mv_arr
    cdef double[::1] dyi = dyi_arr

    with nogil:
        for b in range(n_batch):
            for m in range(dim):
                for n in range(dim):
                    rho[m, n] = rho0[m, n]
                    tan[m, n] = 0
            s_acc = 0.0
            pos = 0
            if n_samples > 0 and steps[0] == 0:
                _record(rho, tan, states, tangents, scores, b, 0, want_tangent)
                pos = 1
            for k in range(n_steps):
                for j in range(n_qubits):
                    expect = 0.0
                    for m in range(dim):
                        expect += zs[j, m] * rho[m, m].real
                    dyi[j] = dw[b, k, j] + cur_coef * expect
                    if want_current:
                        currents[b, k, j] = dw[b, k, j] + exp_coef * expect
                if want_tangent:
                    ds = 0.0
                    for j in range(n_qubits):
                        texpect = 0.0
                        for m in range(dim):
                            texpect += zs[j, m] * tan[m, m].real
                        ds += texpect * dw[b, k, j]
                    s_acc += score_coef * ds
                for m in range(dim):
                    acc = 0.0
                    for j in range(n_qubits):
                        acc += zs[j, m] * dyi[j]
                    m_vec[m] = base[m] + b_coef * acc
                mu = 0.0
                tr_b = 0.0
                for m in range(dim):
                    mvm = m_vec[m]
                    for n in range(dim):
                        gain = mvm * m_vec[n].conjugate() + feed[m, n]
                        upd[m, n] = gain * rho[m, n]
                        if want_tangent:
                            psi = deriv_scale * (h[m] * m_vec[n].conjugate() - mvm * h[n]) * rho[m, n]
                            upd_t[m, n] = gain * tan[m, n] + psi
                    mu += upd[m, m].real
                    if want_tangent:
                        tr_b += upd_t[m, m].real
                inv_mu = 1.0 / mu
                ratio = tr_b / mu
                for m in range(dim):
                    for n in range(dim):
                        rho[m, n] = upd[m, n] * inv_mu
                        if want_tangent:
                            tan[m, n] = upd_t[m, n] * inv_mu - ratio * rho[m, n]
                if pos < n_samples and steps[pos] == k + 1:
                    _record(rho, tan, states, tangents, scores, b, pos, want_tangent)
                    if want_tangent:
                        scores[b, pos] = s_acc
                    pos += 1
