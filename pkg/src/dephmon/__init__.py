"""Continuously monitored dephasing of N qubits.

Simulates collective-rotation frequency dynamics under independent
per-qubit dephasing whose environments are continuously measured
(photo-detection or homodyne), and evaluates the Fisher-information budget
of the resulting conditional states.
"""

__version__ = "0.1.0"

from .dynamics import LindbladParams, dephasing_map_exact, lindblad_rhs, propagate_ode
from .errors import (
    ConfigError,
    DephmonError,
    DimensionOverflowError,
    StateInvariantError,
    TimeStepError,
)
from .kernels import BACKEND
from .metrology import (
    FisherEstimates,
    effective_qfi,
    fi_trajectories,
    fidelity,
    fisher_time_series,
    qfi_fd_oracle,
    qfi_sld,
    trace_distance,
    ultimate_qfi,
    unconditional_qfi,
)
from .operators import (
    N_MAX,
    collective_jz,
    ghz_state,
    product_plus_state,
    purity,
    sigma_z,
    validate_density_matrix,
)
from .trajectories import (
    HOMODYNE,
    PHOTO_DETECTION,
    NoiseRecord,
    TrajectoryResult,
    UnravellingSpec,
    closed_form_hd,
    closed_form_pd,
    export_noise_record,
    load_noise_record,
    simulate_batch,
    simulate_trajectory,
    step_hd,
    step_pd,
)

__all__ = [
    "BACKEND",
    "ConfigError",
    "DephmonError",
    "DimensionOverflowError",
    "FisherEstimates",
    "HOMODYNE",
    "LindbladParams",
    "N_MAX",
    "NoiseRecord",
    "PHOTO_DETECTION",
    "StateInvariantError",
    "TimeStepError",
    "TrajectoryResult",
    "UnravellingSpec",
    "closed_form_hd",
    "closed_form_pd",
    "collective_jz",
    "dephasing_map_exact",
    "effective_qfi",
    "export_noise_record",
    "fi_trajectories",
    "fidelity",
    "fisher_time_series",
    "ghz_state",
    "lindblad_rhs",
    "load_noise_record",
    "product_plus_state",
    "propagate_ode",
    "purity",
    "qfi_fd_oracle",
    "qfi_sld",
    "sigma_z",
    "simulate_batch",
    "simulate_trajectory",
    "step_hd",
    "step_pd",
    "trace_distance",
    "ultimate_qfi",
    "unconditional_qfi",
    "validate_density_matrix",
]
