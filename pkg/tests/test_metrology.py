import math
from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from dephmon import operators as ops
from dephmon.dynamics import LindbladParams, dephasing_map_exact, omega_derivative
from dephmon.errors import ConfigError, StateInvariantError
from dephmon.metrology import (
    effective_qfi,
    fi_trajectories,
    fidelity,
    fisher_time_series,
    qfi_fd_oracle,
    qfi_sld,
    score_fd_oracle,
    trace_distance,
    ultimate_qfi,
    unconditional_qfi,
)
from dephmon.trajectories import UnravellingSpec, simulate_trajectory

from helpers import random_density_matrix, random_traceless_hermitian

HALF_PI = math.pi / 2.0
GHZ2 = ops.ghz_state(2)
PARAMS2 = LindbladParams(2, omega=1.0, kappa=1.0)

# oracle-confirmed constants (RK4 / fidelity finite differences, see spec'd
# cross-checks below)
DEPHASED_GHZ2_QFI_T05 = 0.1353352832366127  # N^2 t^2 exp(-2 N kappa t)
RESCALED_QFI_06 = 0.44932896411722156  # exp(-0.8)


def _unitary_family(rho0, generator_diag, n_qubits, t):
    def state_of(omega):
        return dephasing_map_exact(rho0, LindbladParams(n_qubits, omega, 0.0), t)

    return state_of


def test_fidelity_identical_states():
    rng = np.random.default_rng(0)
    for _ in range(5):
        rho = random_density_matrix(4, rng)
        assert abs(fidelity(rho, rho) - 1.0) < 1e-10


def test_fidelity_orthogonal_pure_states():
    up = np.diag([1.0, 0.0]).astype(complex)
    down = np.diag([0.0, 1.0]).astype(complex)
    assert fidelity(up, down) < 1e-12


def test_fidelity_pure_vs_maximally_mixed():
    npt.assert_allclose(
        fidelity(ops.product_plus_state(1), np.eye(2) / 2), 1 / math.sqrt(2), atol=1e-12
    )


def test_fidelity_symmetry_and_range():
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = random_density_matrix(4, rng)
        b = random_density_matrix(4, rng, rank=2)
        f_ab, f_ba = fidelity(a, b), fidelity(b, a)
        assert abs(f_ab - f_ba) < 1e-10
        assert 0.0 <= f_ab <= 1.0


def test_fidelity_rejects_non_psd():
    bad = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(StateInvariantError):
        fidelity(bad, np.eye(2) / 2)
    with pytest.raises(StateInvariantError):
        fidelity(np.eye(2) / 2, np.eye(4) / 4)


def test_qfi_sld_zero_derivative():
    assert qfi_sld(GHZ2, np.zeros((4, 4))) == 0.0


def test_qfi_sld_noiseless_ghz_heisenberg_scaling():
    rho0 = ops.ghz_state(3)
    params = LindbladParams(3, omega=1.0, kappa=0.0)
    state = dephasing_map_exact(rho0, params, 1.0)
    value = qfi_sld(state, omega_derivative(state, 3, 1.0))
    npt.assert_allclose(value, 9.0, rtol=1e-12)
    oracle = qfi_fd_oracle(_unitary_family(rho0, None, 3, 1.0), 1.0, 1e-4)
    assert abs(value - oracle) / value <= 1e-3


def test_qfi_sld_dephased_ghz():
    value = unconditional_qfi(GHZ2, PARAMS2, 0.5)
    npt.assert_allclose(value, DEPHASED_GHZ2_QFI_T05, rtol=1e-12)

    def state_of(omega):
        return dephasing_map_exact(GHZ2, LindbladParams(2, omega, 1.0), 0.5)

    oracle = qfi_fd_oracle(state_of, 1.0, 1e-4)
    assert abs(value - oracle) / value <= 1e-3


def test_qfi_sld_validates_derivative():
    with pytest.raises(StateInvariantError):
        qfi_sld(GHZ2, np.array([[0.0, 1.0], [0.0, 0.0]]))  # not Hermitian
    with pytest.raises(StateInvariantError):
        qfi_sld(GHZ2, np.eye(4))  # not traceless


def test_qfi_sld_agrees_with_fd_oracle_on_random_unitary_families():
    rng = np.random.default_rng(5)
    for n_qubits in (1, 2):
        dim = 2**n_qubits
        rho0 = 0.8 * random_density_matrix(dim, rng) + 0.2 * np.eye(dim) / dim
        t = 0.7

        def state_of(omega):
            return dephasing_map_exact(rho0, LindbladParams(n_qubits, omega, 0.3), t)

        state = state_of(1.0)
        value = qfi_sld(state, omega_derivative(state, n_qubits, t))
        oracle = qfi_fd_oracle(state_of, 1.0, 1e-4)
        assert abs(value - oracle) <= 1e-3 * max(1.0, value)


def test_qfi_fd_oracle_parameter_independent_family():
    rho = random_density_matrix(4, np.random.default_rng(2))
    assert qfi_fd_oracle(lambda omega: rho, 1.0, 1e-4) < 1e-6


def test_qfi_fd_oracle_single_qubit_rotation():
    oracle = qfi_fd_oracle(_unitary_family(ops.product_plus_state(1), None, 1, 1.0), 1.0, 1e-4)
    npt.assert_allclose(oracle, 1.0, rtol=1e-3)


def test_qfi_unitary_invariance():
    rng = np.random.default_rng(3)
    rho = random_density_matrix(4, rng)
    drho = random_traceless_hermitian(4, rng)
    base = qfi_sld(rho, drho)
    phases = np.exp(1j * rng.standard_normal(4))
    unitary, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    unitary = unitary * phases
    rotated = qfi_sld(unitary @ rho @ unitary.conj().T, unitary @ drho @ unitary.conj().T)
    assert abs(base - rotated) <= 1e-9 * max(1.0, base)


def test_ultimate_qfi_scalings():
    npt.assert_allclose(ultimate_qfi(ops.ghz_state(4), LindbladParams(4, 1, 1), 0.5), 4.0, rtol=1e-12)
    npt.assert_allclose(
        ultimate_qfi(ops.product_plus_state(3), LindbladParams(3, 1, 1), 1.0), 3.0, rtol=1e-12
    )


def test_ultimate_qfi_stationary_state_is_zero():
    basis_state = np.zeros((4, 4), dtype=complex)
    basis_state[0, 0] = 1.0  # J_z eigenstate
    assert ultimate_qfi(basis_state, PARAMS2, 1.0) < 1e-12


def test_ultimate_qfi_rejects_mixed_states():
    with pytest.raises(StateInvariantError):
        ultimate_qfi(np.eye(4) / 4, PARAMS2, 1.0)


def test_unconditional_qfi_noiseless_is_heisenberg():
    params = LindbladParams(2, omega=1.0, kappa=0.0)
    for t in (0.25, 1.0):
        npt.assert_allclose(unconditional_qfi(GHZ2, params, t), 4 * t * t, rtol=1e-12)


def test_fi_trajectories_pure_noise_records_carry_nothing():
    for unr in (
        UnravellingSpec("pd", eta=0.5),
        UnravellingSpec("pd", eta=1.0),
        UnravellingSpec("hd", eta=1.0, theta=HALF_PI),
    ):
        value, stderr = fi_trajectories(GHZ2, PARAMS2, unr, 1.0, 200, seed=3)
        assert abs(value) <= 3.0 * stderr  # exact zeros: 0 <= 0
        assert value == 0.0 and stderr == 0.0


def test_fi_trajectories_theta_zero_positive_estimate():
    # The >3-sigma criterion holds, but only via the O(dt^2) discretization
    # residue of the score: for this model the record likelihood is exactly
    # frequency-independent at every quadrature angle (populations evolve
    # autonomously), so the estimate must also be numerically tiny.
    value, stderr = fi_trajectories(
        GHZ2, PARAMS2, UnravellingSpec("hd", eta=1.0, theta=0.0), 1.0, 200, seed=3
    )
    assert value > 3.0 * stderr
    assert value < 1e-8


def test_fi_trajectories_requires_two_trajectories():
    with pytest.raises(ConfigError):
        fi_trajectories(GHZ2, PARAMS2, UnravellingSpec("pd", eta=1.0), 1.0, 1, seed=0)


def test_effective_qfi_pd_perfect_detection_saturates_ultimate():
    params = LindbladParams(3, omega=1.0, kappa=1.0)
    rows, samples = fisher_time_series(
        ops.ghz_state(3),
        params,
        UnravellingSpec("pd", eta=1.0),
        [1.0],
        50,
        seed=11,
        return_samples=True,
    )
    est = rows[0]
    assert abs(est.mean_conditional_qfi - 9.0) <= 1e-3 * 9.0
    npt.assert_allclose(samples["conditional_qfi"], 9.0, rtol=1e-3)
    assert abs(est.effective_qfi - est.ultimate_qfi) <= 1e-9


def test_effective_qfi_rescaled_coupling_value():
    est = effective_qfi(GHZ2, PARAMS2, UnravellingSpec("pd", eta=0.6), 0.5, 50, seed=11)
    npt.assert_allclose(est.mean_conditional_qfi, RESCALED_QFI_06, rtol=1e-6)
    reduced = unconditional_qfi(GHZ2, replace(PARAMS2, kappa=0.4), 0.5)
    npt.assert_allclose(est.mean_conditional_qfi, reduced, rtol=1e-9)


def test_rescaling_identity_holds_for_arbitrary_initial_states():
    # the conditional state is a record unitary applied to the reduced-
    # coupling unconditional state for *any* input, including mixed ones,
    # so the QFIs coincide exactly
    from dephmon.trajectories import closed_form_hd, closed_form_pd

    rng = np.random.default_rng(41)
    eta = 0.35
    reduced = replace(PARAMS2, kappa=(1 - eta) * PARAMS2.kappa)
    for rho0 in (random_density_matrix(4, rng), random_density_matrix(4, rng, rank=2)):
        reference = unconditional_qfi(rho0, reduced, 0.9)
        for state in (
            closed_form_pd(rho0, PARAMS2, eta, np.array([1, 0]), 0.9),
            closed_form_hd(rho0, PARAMS2, eta, rng.standard_normal(2), 0.9),
        ):
            value = qfi_sld(state, omega_derivative(state, 2, 0.9))
            assert abs(value - reference) <= 1e-9 * max(1.0, reference)


@pytest.mark.parametrize(
    "unr",
    [UnravellingSpec("pd", eta=0.0), UnravellingSpec("hd", eta=0.0, theta=0.3)],
    ids=["pd", "hd"],
)
def test_effective_qfi_eta_zero_equals_unconditional(unr):
    est = effective_qfi(GHZ2, PARAMS2, unr, 1.0, 10, seed=2)
    assert est.fi_traj == 0.0
    assert abs(est.effective_qfi - est.unconditional_qfi) <= 1e-12


def test_conditional_qfi_is_homogeneous_for_pure_noise_records():
    for unr in (UnravellingSpec("pd", eta=0.6), UnravellingSpec("hd", eta=0.6, theta=HALF_PI)):
        _, samples = fisher_time_series(
            GHZ2, PARAMS2, unr, [1.0], 100, seed=7, return_samples=True
        )
        assert samples["conditional_qfi"][:, 0].var() <= 1e-6


def test_effective_qfi_by_construction_identity():
    est = effective_qfi(
        GHZ2, PARAMS2, UnravellingSpec("hd", eta=0.8, theta=0.0), 1.0, 60, seed=9
    )
    npt.assert_allclose(est.effective_qfi, est.fi_traj + est.mean_conditional_qfi, rtol=1e-12)
    assert est.fi_traj_stderr >= 0.0
    assert est.mean_conditional_qfi_stderr >= 0.0
    assert est.trajectories_used == 60


def test_score_fd_oracle_crosschecks_tangent_score():
    # both score routes must agree that the record carries (numerically) no
    # frequency information; the finite-difference route keeps an O(dt^{3/2})
    # per-step artifact, bounded here well below any real signal scale
    unr = UnravellingSpec("hd", eta=1.0, theta=0.0)
    for seed in range(5):
        res = simulate_trajectory(GHZ2, PARAMS2, unr, [1.0], seed=seed, dt=1e-3)
        fd = score_fd_oracle(GHZ2, PARAMS2, unr, res.noise.increments, 1e-3)
        assert abs(res.scores[-1]) < 1e-4
        assert abs(fd) < 2e-2
        assert abs(fd - res.scores[-1]) < 2e-2


def test_score_fd_oracle_pure_noise_quadrature():
    unr = UnravellingSpec("hd", eta=0.7, theta=HALF_PI)
    res = simulate_trajectory(GHZ2, PARAMS2, unr, [1.0], seed=4, dt=1e-3)
    assert res.scores[-1] == 0.0
    fd = score_fd_oracle(GHZ2, PARAMS2, unr, res.noise.increments, 1e-3)
    assert abs(fd) < 2e-2


def test_score_fd_oracle_rejects_pd():
    with pytest.raises(ConfigError):
        score_fd_oracle(GHZ2, PARAMS2, UnravellingSpec("pd", eta=1.0), np.zeros((5, 2)), 1e-3)


def test_filter_tangent_matches_fixed_record_finite_difference():
    # the co-propagated tangent is the omega-derivative of the normalized
    # filter state at *fixed* measurement record: replay the recorded
    # currents at omega +/- delta and compare the difference quotient
    from dephmon import operators as op_mod
    from dephmon.trajectories import simulate_batch

    n_qubits, dt, eta, theta, n_steps = 2, 1e-3, 0.8, 0.0, 400
    params = LindbladParams(n_qubits, omega=1.0, kappa=1.0)
    unr = UnravellingSpec("hd", eta=eta, theta=theta)
    batch = simulate_batch(
        GHZ2, params, unr, [n_steps * dt], 3, 1, dt=dt, want_tangent=True
    )

    zs = op_mod.pauli_z_signs(n_qubits)
    h = op_mod.jz_diagonal(n_qubits)
    d_h = op_mod.hamming_table(n_qubits).astype(float)
    g = math.sqrt(eta * params.kappa / 2.0)
    feed = (1 - eta) * (params.kappa / 2.0) * dt * (n_qubits - 2.0 * d_h)

    # redraw the batch's noise to reconstruct the observed internal currents
    from dephmon.trajectories import draw_hd_increments, trajectory_rng

    dw = draw_hd_increments(n_qubits, dt, n_steps, trajectory_rng(3, 0))

    def replay(omega):
        rho = np.array(GHZ2)
        state = rho.copy()
        recorded = np.empty((n_steps, n_qubits))
        # pass 1 at the true frequency to fix the record
        for k in range(n_steps):
            expect = zs @ state.real.diagonal()
            recorded[k] = dw[k] + 2.0 * g * dt * expect
            m_vec = 1.0 - (1j * params.omega * h + params.kappa * n_qubits / 4.0) * dt
            m_vec = m_vec + g * (zs.T @ recorded[k])
            new = (m_vec[:, None] * m_vec.conj()[None, :] + feed) * state
            state = new / np.trace(new).real
        # pass 2 at the model frequency driven by the fixed record
        for k in range(n_steps):
            m_vec = 1.0 - (1j * omega * h + params.kappa * n_qubits / 4.0) * dt
            m_vec = m_vec + g * (zs.T @ recorded[k])
            new = (m_vec[:, None] * m_vec.conj()[None, :] + feed) * rho
            rho = new / np.trace(new).real
        return rho

    delta = 1e-6
    fd = (replay(params.omega + delta) - replay(params.omega - delta)) / (2 * delta)
    npt.assert_allclose(batch.tangents[0, -1], fd, atol=1e-6)
    npt.assert_allclose(batch.states[0, -1], replay(params.omega), atol=1e-12)


def test_single_trajectory_scores_match_batch_machinery():
    # trajectory i of a batch is keyed by (seed, i), so trajectory 0 must
    # reproduce the standalone simulation exactly
    unr = UnravellingSpec("hd", eta=0.9, theta=0.1)
    res = simulate_trajectory(GHZ2, PARAMS2, unr, [0.5, 1.0], seed=23, dt=1e-3)
    rows, samples = fisher_time_series(
        GHZ2, PARAMS2, unr, [0.5, 1.0], 1, seed=23, return_samples=True
    )
    npt.assert_array_equal(samples["scores"][0], res.scores)
    assert rows[0].fi_traj == res.scores[0] ** 2
    assert rows[0].fi_traj_stderr == 0.0


def test_generic_angle_trajectory_average_recovers_unconditional():
    # theta = pi/4 exercises both quadrature components of the Kraus gain
    from dephmon.trajectories import simulate_batch

    unr = UnravellingSpec("hd", eta=0.8, theta=math.pi / 4)
    batch = simulate_batch(GHZ2, PARAMS2, unr, [1.0], 33, 2000, dt=1e-3)
    mean_state = batch.states[:, -1].mean(axis=0)
    assert trace_distance(mean_state, dephasing_map_exact(GHZ2, PARAMS2, 1.0)) <= 0.05


def test_common_record_finite_difference_matches_analytic_derivative():
    # pure-noise records are frequency independent, so replaying the same
    # record at omega +/- delta and differencing the closed-form states must
    # reproduce the analytic elementwise derivative
    from dephmon.trajectories import closed_form_hd, closed_form_pd

    rng = np.random.default_rng(17)
    counts = np.array([1, 2])
    w_sums = rng.standard_normal(2)
    delta = 1e-5
    for builder, record in ((closed_form_pd, counts), (closed_form_hd, w_sums)):
        hi = builder(GHZ2, replace(PARAMS2, omega=1.0 + delta), 0.6, record, 1.0)
        lo = builder(GHZ2, replace(PARAMS2, omega=1.0 - delta), 0.6, record, 1.0)
        state = builder(GHZ2, PARAMS2, 0.6, record, 1.0)
        npt.assert_allclose(
            (hi - lo) / (2 * delta), omega_derivative(state, 2, 1.0), atol=1e-8
        )


def test_trace_distance_basics():
    assert trace_distance(GHZ2, GHZ2) == 0.0
    up = np.diag([1.0, 0.0]).astype(complex)
    down = np.diag([0.0, 1.0]).astype(complex)
    npt.assert_allclose(trace_distance(up, down), 1.0, atol=1e-14)
