"""Conditional dynamics under continuous monitoring of the dephasing channels.

Two unravellings are provided: per-channel photo-detection ("pd", Poisson
clicks) and per-channel homodyne detection ("hd", Wiener photocurrents with
quadrature angle theta).  Step integration lives in the compiled/vectorized
kernels (see :mod:`dephmon._kernels_py` for the worked-out schemes); this
module owns noise generation, record bookkeeping and the closed-form
conditional-state propagators that the step integrators are tested against:

* photo-detection: the conditional state equals the unconditional evolution
  with coupling reduced to (1-eta)*kappa, conjugated by sz_j^(N_j(t)); only
  click parities matter.
* homodyne at the pure-noise quadrature: same reduced-coupling evolution,
  conjugated by exp(i*sqrt(eta*kappa/2) * sum_j W_j(t) sz_j).

Reproducibility: each trajectory uses an RNG stream keyed by
(master_seed, trajectory_index), with per-step draws consumed channel by
channel in order 1..N, so results do not depend on batching or scheduling.
"""

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels, operators
from .dynamics import LindbladParams, dephasing_factors, dephasing_map_exact
from .errors import ConfigError, StateInvariantError, TimeStepError

PHOTO_DETECTION = "pd"
HOMODYNE = "hd"

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class UnravellingSpec:
    """Detection scheme: kind "pd" or "hd", efficiency eta, homodyne angle."""

    kind: str
    eta: float
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in (PHOTO_DETECTION, HOMODYNE):
            raise ConfigError(f"unravelling kind must be 'pd' or 'hd', got {self.kind!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"efficiency eta must lie in [0, 1], got {self.eta}")
        if self.kind == HOMODYNE:
            if self.theta is None:
                raise ConfigError("homodyne unravelling requires a theta angle")
            object.__setattr__(self, "theta", float(self.theta) % (2.0 * math.pi))
        elif self.theta is not None:
            raise ConfigError("theta is only meaningful for the homodyne unravelling")

    @property
    def is_pure_noise(self) -> bool:
        """True when the record carries no signal: pd, eta=0, or a homodyne
        angle at an odd multiple of pi/2.

        In these cases the conditional state is given exactly by the
        closed-form propagators for every record (for theta = 3*pi/2 with
        the record sign flipped).
        """
        if self.kind == PHOTO_DETECTION or self.eta == 0.0:
            return True
        return kernels.snapped_cos(self.theta) == 0.0


@dataclass(frozen=True)
class NoiseRecord:
    """Per-channel, per-step stochastic increments of one trajectory."""

    kind: str  # "poisson" or "wiener"
    dt: float
    increments: np.ndarray  # (n_steps, n_channels)

    def __post_init__(self):
        if self.kind not in ("poisson", "wiener"):
            raise ConfigError(f"record kind must be 'poisson' or 'wiener', got {self.kind!r}")
        inc = np.asarray(self.increments)
        if inc.ndim != 2:
            raise ConfigError(f"increments must be 2-d (steps, channels), got {inc.shape}")
        if self.kind == "poisson" and inc.size and not np.isin(inc, (0, 1)).all():
            raise StateInvariantError("poisson increments must be 0 or 1")

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def n_channels(self) -> int:
        return self.increments.shape[1]

    def cumulative(self, step: int | None = None) -> np.ndarray:
        """Running totals N_j / W_j after `step` increments (default: all)."""
        if step is None:
            step = self.n_steps
        if step == 0:
            return np.zeros(self.n_channels, dtype=self.increments.dtype)
        return self.increments[:step].sum(axis=0)


@dataclass
class TrajectoryResult:
    """One simulated trajectory: record, sampled states and scores."""

    params: LindbladParams
    unravelling: UnravellingSpec
    seed: int
    dt: float
    sample_times: np.ndarray
    sample_steps: np.ndarray
    noise: NoiseRecord
    current: np.ndarray | None  # (n_steps, N) homodyne photocurrent, hd only
    states: np.ndarray  # (S, dim, dim) conditional states at sample times
    scores: np.ndarray  # (S,) log-likelihood frequency tangent at sample times


@dataclass
class BatchResult:
    """Per-trajectory outputs of a batch run (indexed [trajectory, sample])."""

    sample_times: np.ndarray
    sample_steps: np.ndarray
    states: np.ndarray | None
    tangents: np.ndarray | None
    scores: np.ndarray | None
    cumulative: np.ndarray  # (M, S, N) record totals at sample times


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent RNG stream for one trajectory, keyed on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _check_dt(dt: float) -> None:
    if not (dt > 0.0 and math.isfinite(dt)):
        raise TimeStepError(f"step size must be positive and finite, got dt={dt}")


def draw_pd_increments(params, eta, dt, n_steps, rng) -> np.ndarray:
    """Per-channel Bernoulli clicks with mean eta*kappa*dt/2."""
    _check_dt(dt)
    p_click = eta * params.kappa * dt / 2.0
    if p_click >= 0.1:
        warnings.warn(
            f"click probability per step {p_click:.3g} >= 0.1; decrease dt",
            RuntimeWarning,
            stacklevel=2,
        )
    u = rng.random((n_steps, params.n_qubits))
    return (u < p_click).astype(np.uint8)


def draw_hd_increments(n_channels, dt, n_steps, rng) -> np.ndarray:
    """Wiener increments with variance dt, consumed channel-major per step."""
    _check_dt(dt)
    return rng.standard_normal((n_steps, n_channels)) * math.sqrt(dt)


def apply_pd_step(rho, params, eta, dt, clicks) -> np.ndarray:
    """One photo-detection step for given click pattern (reference path)."""
    out = np.asarray(rho, dtype=np.complex128) * dephasing_factors(
        replace(params, kappa=(1.0 - eta) * params.kappa), dt
    )
    zs = operators.pauli_z_signs(params.n_qubits)
    for j in range(params.n_qubits):
        if clicks[j]:
            out *= zs[j][:, None]
            out *= zs[j][None, :]
    return out


def step_pd(rho, params, eta, dt, rng):
    """Sample clicks and advance one photo-detection step.

    Returns (new_state, clicks).  The deterministic part is the exact
    reduced-coupling propagator over dt, then sz conjugation per click.
    """
    clicks = draw_pd_increments(params, eta, dt, 1, rng)[0]
    return apply_pd_step(rho, params, eta, dt, clicks), clicks


def apply_hd_step(rho, params, eta, theta, dt, dw_row):
    """One homodyne Kraus step for given Wiener increments (reference path).

    Returns (new_state, dy_row) with the reported current
    dy_j = dw_j + 2*sqrt(eta)*cos(theta)*Tr[rho sz_j]*dt.  See the kernel
    module docstring for the derivation and the internal current
    normalization that makes the eta=0 limit exact to O(dt^2).
    """
    _check_dt(dt)
    rho = np.asarray(rho, dtype=np.complex128)
    n = params.n_qubits
    zs = operators.pauli_z_signs(n)
    h = operators.jz_diagonal(n)
    d_h = operators.hamming_table(n).astype(np.float64)

    g = math.sqrt(eta * params.kappa / 2.0)
    cos_t = kernels.snapped_cos(theta)
    b = g * complex(cos_t, math.sin(theta))
    expect = zs @ rho.real.diagonal()
    dy_internal = dw_row + 2.0 * g * cos_t * dt * expect
    dy_reported = dw_row + 2.0 * math.sqrt(eta) * cos_t * dt * expect

    m_vec = 1.0 - (1j * params.omega * h + params.kappa * n / 4.0) * dt + b * (zs.T @ dy_internal)
    feed = (1.0 - eta) * (params.kappa / 2.0) * dt * (n - 2.0 * d_h)
    new_rho = (m_vec[:, None] * m_vec.conj()[None, :] + feed) * rho
    return new_rho / np.trace(new_rho).real, dy_reported


def step_hd(rho, params, eta, theta, dt, rng):
    """Sample Wiener increments and advance one homodyne step."""
    dw_row = draw_hd_increments(params.n_qubits, dt, 1, rng)[0]
    new_rho, dy_row = apply_hd_step(rho, params, eta, theta, dt, dw_row)
    return new_rho, dw_row, dy_row


def sample_steps_for(sample_times, dt):
    """Snap a strictly increasing time grid to multiples of dt."""
    _check_dt(dt)
    times = np.asarray(sample_times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ConfigError("sample_times must be a non-empty 1-d sequence")
    if (times < 0).any():
        raise ConfigError("sample_times must be >= 0")
    if not (np.diff(times) > 0).all():
        raise ConfigError("sample_times must be strictly increasing")
    steps = np.rint(times / dt).astype(np.int64)
    if np.unique(steps).size != steps.size:
        raise ConfigError(f"sample times collide after snapping to dt={dt}")
    return steps, steps * dt


def simulate_trajectory(rho0, params, unravelling, sample_times, seed, dt=DEFAULT_DT):
    """Simulate one trajectory; fully deterministic given (seed, config)."""
    operators.validate_density_matrix(rho0, params.n_qubits)
    steps, times = sample_steps_for(sample_times, dt)
    n_steps = int(steps[-1])
    rng = trajectory_rng(seed, 0)

    if unravelling.kind == PHOTO_DETECTION:
        inc = draw_pd_increments(params, unravelling.eta, dt, n_steps, rng)
        states, _, scores = kernels.run_pd_batch(
            rho0,
            params.omega,
            (1.0 - unravelling.eta) * params.kappa,
            dt,
            inc[None, :, :],
            steps,
            want_tangent=True,
        )
        noise = NoiseRecord("poisson", dt, inc)
        current = None
    else:
        inc = draw_hd_increments(params.n_qubits, dt, n_steps, rng)
        states, _, scores, currents = kernels.run_hd_batch(
            rho0,
            params.omega,
            params.kappa,
            unravelling.eta,
            unravelling.theta,
            dt,
            inc[None, :, :],
            steps,
            want_tangent=True,
            want_current=True,
        )
        noise = NoiseRecord("wiener", dt, inc)
        current = currents[0]

    return TrajectoryResult(
        params=params,
        unravelling=unravelling,
        seed=seed,
        dt=dt,
        sample_times=times,
        sample_steps=steps,
        noise=noise,
        current=current,
        states=states[0],
        scores=scores[0],
    )


def _cumulative_at(increments, steps):
    """Totals of (B, n_steps, N) increments after each sampled step count."""
    n_batch, _, n_channels = increments.shape
    out = np.zeros((n_batch, steps.size, n_channels), dtype=np.float64)
    running = increments.cumsum(axis=1, dtype=np.float64)
    for si, st in enumerate(steps):
        if st > 0:
            out[:, si, :] = running[:, st - 1, :]
    return out


def _run_chunk(args):
    (rho0, params, unravelling, steps, dt, master_seed, start, stop,
     want_states, want_tangent) = args
    n_steps = int(steps[-1])
    n_batch = stop - start
    inc = np.empty((n_batch, n_steps, params.n_qubits), dtype=np.float64)
    for i in range(n_batch):
        rng = trajectory_rng(master_seed, start + i)
        if unravelling.kind == PHOTO_DETECTION:
            inc[i] = draw_pd_increments(params, unravelling.eta, dt, n_steps, rng)
        else:
            inc[i] = draw_hd_increments(params.n_qubits, dt, n_steps, rng)
    cumulative = _cumulative_at(inc, steps)

    if not (want_states or want_tangent):
        return None, None, None, cumulative
    if unravelling.kind == PHOTO_DETECTION:
        states, tangents, scores = kernels.run_pd_batch(
            rho0,
            params.omega,
            (1.0 - unravelling.eta) * params.kappa,
            dt,
            inc.astype(np.uint8),
            steps,
            want_tangent=want_tangent,
        )
    else:
        states, tangents, scores, _ = kernels.run_hd_batch(
            rho0,
            params.omega,
            params.kappa,
            unravelling.eta,
            unravelling.theta,
            dt,
            inc,
            steps,
            want_tangent=want_tangent,
            want_current=False,
        )
    if not want_states:
        states = None
    return states, tangents, scores, cumulative


def simulate_batch(
    rho0,
    params,
    unravelling,
    sample_times,
    master_seed,
    n_traj,
    dt=DEFAULT_DT,
    want_states=True,
    want_tangent=False,
    workers=1,
    max_chunk=1024,
):
    """Run n_traj independent trajectories and collect per-trajectory outputs.

    Trajectories are keyed by their global index, so the outputs are
    identical for any workers/max_chunk choice; chunks are reassembled in
    index order.
    """
    operators.validate_density_matrix(rho0, params.n_qubits)
    if n_traj < 1:
        raise ConfigError(f"need at least one trajectory, got {n_traj}")
    steps, times = sample_steps_for(sample_times, dt)
    workers = workers or os.cpu_count() or 1
    chunk = min(max_chunk, max(1, -(-n_traj // workers)))
    ranges = [(s, min(s + chunk, n_traj)) for s in range(0, n_traj, chunk)]
    payloads = [
        (rho0, params, unravelling, steps, dt, master_seed, start, stop,
         want_states, want_tangent)
        for start, stop in ranges
    ]
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, payloads))
    else:
        parts = [_run_chunk(p) for p in payloads]

    def _cat(idx):
        if parts[0][idx] is None:
            return None
        return np.concatenate([p[idx] for p in parts], axis=0)

    return BatchResult(
        sample_times=times,
        sample_steps=steps,
        states=_cat(0),
        tangents=_cat(1),
        scores=_cat(2),
        cumulative=_cat(3),
    )


def closed_form_pd(rho0, params, eta, counts, t):
    """Conditional state from click totals N_j(t).

    Reduced-coupling unconditional evolution over t followed by sz_j
    conjugation per odd N_j; only parities enter.
    """
    counts = np.asarray(counts)
    if counts.shape != (params.n_qubits,):
        raise ConfigError(f"counts must have shape ({params.n_qubits},), got {counts.shape}")
    if (counts < 0).any() or not np.issubdtype(counts.dtype, np.integer):
        raise ConfigError("counts must be nonnegative integers")
    return closed_form_pd_batch(rho0, params, eta, counts[None, :], t)[0]


def closed_form_pd_batch(rho0, params, eta, counts, t):
    """Vectorized closed_form_pd over (M, N) count vectors."""
    zs = operators.pauli_z_signs(params.n_qubits)
    evolved = dephasing_map_exact(rho0, replace(params, kappa=(1.0 - eta) * params.kappa), t)
    odd = (np.asarray(counts) % 2).astype(bool)
    sgn = np.where(odd[:, :, None], zs[None, :, :], 1.0).prod(axis=1)
    return evolved[None, :, :] * sgn[:, :, None] * sgn[:, None, :]


def closed_form_hd(rho0, params, eta, w_sums, t):
    """Conditional state from integrated Wiener records W_j(t) at the
    pure-noise quadrature (theta = pi/2).

    Reduced-coupling unconditional evolution over t conjugated by
    exp(i*sqrt(eta*kappa/2) * sum_j W_j sz_j).
    """
    w_sums = np.asarray(w_sums, dtype=np.float64)
    if w_sums.shape != (params.n_qubits,):
        raise ConfigError(f"W must have shape ({params.n_qubits},), got {w_sums.shape}")
    return closed_form_hd_batch(rho0, params, eta, w_sums[None, :], t)[0]


def closed_form_hd_batch(rho0, params, eta, w_sums, t):
    """Vectorized closed_form_hd over (M, N) integrated records."""
    zs = operators.pauli_z_signs(params.n_qubits)
    evolved = dephasing_map_exact(rho0, replace(params, kappa=(1.0 - eta) * params.kappa), t)
    g = math.sqrt(eta * params.kappa / 2.0)
    phases = np.exp(1j * g * (np.asarray(w_sums)[:, :, None] * zs[None, :, :]).sum(axis=1))
    return evolved[None, :, :] * phases[:, :, None] * phases.conj()[:, None, :]


def export_noise_record(record: NoiseRecord, path) -> None:
    """Write a record as line-oriented text: one step per line, channels
    comma-separated, after a single header line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            f"# kind={record.kind} dt={record.dt:.17g} "
            f"steps={record.n_steps} channels={record.n_channels}\n"
        )
        if record.kind == "poisson":
            for row in record.increments:
                fh.write(",".join(str(int(v)) for v in row) + "\n")
        else:
            for row in record.increments:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_noise_record(path) -> NoiseRecord:
    """Parse a record written by :func:`export_noise_record`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise ConfigError(f"missing record header in {path}")
        fields = dict(part.split("=", 1) for part in header[2:].split())
        try:
            kind = fields["kind"]
            dt = float(fields["dt"])
            n_steps = int(fields["steps"])
            n_channels = int(fields["channels"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed record header: {header!r}") from exc
        dtype = np.uint8 if kind == "poisson" else np.float64
        inc = np.empty((n_steps, n_channels), dtype=dtype)
        for i in range(n_steps):
            row = fh.readline().strip().split(",")
            if len(row) != n_channels:
                raise ConfigError(f"record line {i + 2} has {len(row)} fields, want {n_channels}")
            inc[i] = [float(v) for v in row]
    return NoiseRecord(kind, dt, inc)
