"""Command-line experiment runner.

Three subcommands:

* ``unconditional`` - unconditional and ultimate QFI versus time,
* ``monitor``       - Monte-Carlo Fisher estimates from simulated
                      continuous-monitoring trajectories,
* ``verify``        - self-verification suite (reduced scale by default).

Configuration comes from a JSON file (exactly the SimConfig fields; unknown
keys are rejected) overridden by command-line flags of the same names.
Data goes to --out or standard output; progress and timing go to standard
error.  Output files are byte-identical for identical (config, seed)
regardless of the worker count.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, operators
from .dynamics import LindbladParams
from .errors import ConfigError, DephmonError
from .metrology import fisher_time_series, ultimate_qfi, unconditional_qfi
from .trajectories import DEFAULT_DT, HOMODYNE, PHOTO_DETECTION, UnravellingSpec
from .verify import run_checks

BUILTIN_STATES = ("ghz", "plus_product")


@dataclasses.dataclass
class SimConfig:
    """All physical and numerical parameters of one run."""

    N: int
    omega: float = 1.0
    kappa: float = 1.0
    eta: float = 1.0
    unravelling: str = PHOTO_DETECTION
    theta: float | None = None
    initial_state: str = "ghz"
    t_max: float = 1.0
    dt: float = DEFAULT_DT
    sample_times: list[float] | None = None
    trajectories: int = 1000
    seed: int = 12345

    def __post_init__(self):
        if self.sample_times is None:
            self.sample_times = [self.t_max]
        self.validate()

    def validate(self):
        if not isinstance(self.N, int) or isinstance(self.N, bool):
            raise ConfigError(f"N must be an integer, got {self.N!r}")
        if not 1 <= self.N <= operators.N_MAX:
            raise ConfigError(f"N must lie in 1..{operators.N_MAX}, got {self.N}")
        for name in ("omega", "kappa", "eta", "t_max", "dt"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.unravelling not in (PHOTO_DETECTION, HOMODYNE):
            raise ConfigError(f"unravelling must be 'pd' or 'hd', got {self.unravelling!r}")
        if self.unravelling == HOMODYNE and self.theta is None:
            raise ConfigError("unravelling 'hd' requires theta")
        if self.unravelling == PHOTO_DETECTION and self.theta is not None:
            raise ConfigError("theta is only valid with unravelling 'hd'")
        if self.t_max <= 0:
            raise ConfigError(f"t_max must be > 0, got {self.t_max}")
        if self.dt <= 0 or self.dt > self.t_max:
            raise ConfigError(f"need 0 < dt <= t_max, got dt={self.dt}")
        times = self.sample_times
        if not times or any(
            not isinstance(v, (int, float)) or not math.isfinite(v) for v in times
        ):
            raise ConfigError("sample_times must be a non-empty list of finite numbers")
        if any(v < 0 or v > self.t_max for v in times):
            raise ConfigError("sample_times must lie within [0, t_max]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("sample_times must be strictly increasing")
        if not isinstance(self.trajectories, int) or self.trajectories < 1:
            raise ConfigError(f"trajectories must be a positive integer, got {self.trajectories!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.initial_state not in BUILTIN_STATES and not os.path.exists(self.initial_state):
            raise ConfigError(
                f"initial_state must be one of {BUILTIN_STATES} or an existing file, "
                f"got {self.initial_state!r}"
            )

    def echo(self) -> str:
        """Canonical JSON echo; reloading it reproduces this config."""
        return json.dumps(dataclasses.asdict(self), sort_keys=True, separators=(",", ":"))

    @property
    def params(self) -> LindbladParams:
        return LindbladParams(self.N, self.omega, self.kappa)

    @property
    def unravelling_spec(self) -> UnravellingSpec:
        return UnravellingSpec(self.unravelling, self.eta, self.theta)


@dataclasses.dataclass
class RunReport:
    config: SimConfig
    columns: list[str]
    rows: list[tuple]
    wall_clock: float
    version: str = __version__


def load_state_file(path: str, n_qubits: int) -> np.ndarray:
    """Plain-text amplitude vector: one "re im" pair per line."""
    amplitudes = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 're im', got {line!r}")
            try:
                amplitudes.append(complex(float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    vec = np.asarray(amplitudes, dtype=np.complex128)
    dim = 1 << n_qubits
    if vec.size != dim:
        raise ConfigError(f"{path}: {vec.size} amplitudes, need {dim} for N={n_qubits}")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ConfigError(f"{path}: zero state vector")
    if abs(norm - 1.0) > 1e-8:
        print(f"warning: renormalizing state from {path} (norm {norm:.12g})", file=sys.stderr)
    vec = vec / norm
    return np.outer(vec, vec.conj())


def build_initial_state(config: SimConfig) -> np.ndarray:
    if config.initial_state == "ghz":
        return operators.ghz_state(config.N)
    if config.initial_state == "plus_product":
        return operators.product_plus_state(config.N)
    return load_state_file(config.initial_state, config.N)


UNCONDITIONAL_COLUMNS = [
    ("time", "sample time"),
    ("unconditional_qfi", "QFI of the unconditionally dephased state"),
    ("ultimate_qfi", "QFI of the noiseless rotation (unravelling-independent bound)"),
]

MONITOR_COLUMNS = [
    ("time", "sample time"),
    ("fi_traj", "Monte-Carlo Fisher information of the measurement record"),
    ("fi_traj_stderr", "standard error of fi_traj over trajectories"),
    ("mean_conditional_qfi", "trajectory-averaged QFI of the conditional states"),
    ("mean_conditional_qfi_stderr", "standard error of mean_conditional_qfi"),
    ("effective_qfi", "fi_traj + mean_conditional_qfi"),
    ("effective_qfi_stderr", "standard error of effective_qfi"),
    ("unconditional_qfi", "QFI of the unconditionally dephased state"),
    ("ultimate_qfi", "QFI of the noiseless rotation (upper bound)"),
    ("trajectories", "number of trajectories used"),
]


def cmd_unconditional(config: SimConfig) -> RunReport:
    start = time.perf_counter()
    rho0 = build_initial_state(config)
    rows = [
        (t, unconditional_qfi(rho0, config.params, t), ultimate_qfi(rho0, config.params, t))
        for t in config.sample_times
    ]
    return RunReport(
        config, [name for name, _ in UNCONDITIONAL_COLUMNS], rows, time.perf_counter() - start
    )


def cmd_monitor(config: SimConfig, workers: int | None = None) -> RunReport:
    start = time.perf_counter()
    rho0 = build_initial_state(config)
    workers = workers or os.cpu_count() or 1
    print(
        f"monitor: {config.trajectories} trajectories, dt={config.dt:g}, "
        f"workers={workers}",
        file=sys.stderr,
    )
    estimates = fisher_time_series(
        rho0,
        config.params,
        config.unravelling_spec,
        config.sample_times,
        config.trajectories,
        config.seed,
        dt=config.dt,
        workers=workers,
    )
    rows = [
        (
            t,
            est.fi_traj,
            est.fi_traj_stderr,
            est.mean_conditional_qfi,
            est.mean_conditional_qfi_stderr,
            est.effective_qfi,
            est.effective_qfi_stderr,
            est.unconditional_qfi,
            est.ultimate_qfi,
            est.trajectories_used,
        )
        for t, est in zip(config.sample_times, estimates)
    ]
    return RunReport(
        config, [name for name, _ in MONITOR_COLUMNS], rows, time.perf_counter() - start
    )


def write_report(report: RunReport, out: str | None) -> None:
    """CSV emission: config/version comment header then one row per time."""

    def fmt(value):
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        return f"{float(value):.17g}"

    lines = [f"# config={report.config.echo()}", f"# version={report.version}"]
    lines.append(",".join(report.columns))
    lines.extend(",".join(fmt(v) for v in row) for row in report.rows)
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="ascii") as fh:
            fh.write(text)
    print(f"wall-clock {report.wall_clock:.3f}s", file=sys.stderr)


def describe_columns(command: str) -> str:
    table = UNCONDITIONAL_COLUMNS if command == "unconditional" else MONITOR_COLUMNS
    width = max(len(name) for name, _ in table)
    return "\n".join(f"{name:<{width}}  {doc}" for name, doc in table)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--N", type=int, dest="N", help="qubit count")
    parser.add_argument("--omega", type=float, help="rotation frequency")
    parser.add_argument("--kappa", type=float, help="dephasing rate")
    parser.add_argument("--eta", type=float, help="detection efficiency in [0,1]")
    parser.add_argument("--unravelling", choices=(PHOTO_DETECTION, HOMODYNE))
    parser.add_argument("--theta", type=float, help="homodyne angle (hd only)")
    parser.add_argument("--dt", type=float, help="integration step")
    parser.add_argument("--t-max", type=float, dest="t_max", help="final time")
    parser.add_argument(
        "--sample-times",
        dest="sample_times",
        help="comma-separated sample times within [0, t_max]",
    )
    parser.add_argument("--trajectories", type=int, help="Monte-Carlo trajectory count")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="parallel worker processes")
    parser.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    parser.add_argument(
        "--describe-columns",
        action="store_true",
        help="print the output column documentation and exit",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dephmon",
        description="Continuously monitored dephasing qubits: simulation and Fisher metrology",
    )
    parser.add_argument("--version", action="version", version=f"dephmon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("unconditional", "unconditional and ultimate QFI versus time"),
        ("monitor", "Monte-Carlo Fisher estimates from monitored trajectories"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_config_flags(p)
    p_verify = sub.add_parser("verify", help="run the self-verification suite")
    p_verify.add_argument("--full", action="store_true", help="acceptance-suite scale")
    p_verify.add_argument("--seed", type=int, help="override the check seeds")
    p_verify.add_argument("--workers", type=int, help="parallel worker processes")
    return parser


def config_from_args(args: argparse.Namespace) -> SimConfig:
    values: dict = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: top-level JSON object expected")
        known = {f.name for f in dataclasses.fields(SimConfig)}
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise ConfigError(f"{args.config}: unknown config fields {unknown}")
        values.update(loaded)
    for field in dataclasses.fields(SimConfig):
        if field.name == "sample_times":
            continue
        flag = getattr(args, field.name, None)
        if flag is not None:
            values[field.name] = flag
    if getattr(args, "sample_times", None) is not None:
        try:
            values["sample_times"] = [float(v) for v in args.sample_times.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--sample-times: {exc}") from exc
    if "N" not in values:
        raise ConfigError("N is required (flag --N or config field)")
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            results = run_checks(full=args.full, seed=args.seed, workers=args.workers or 1)
            for result in results:
                print(result.line())
            failed = [r for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return 3 if failed else 0
        if args.describe_columns:
            print(describe_columns(args.command))
            return 0
        config = config_from_args(args)
        if args.command == "unconditional":
            report = cmd_unconditional(config)
        else:
            report = cmd_monitor(config, workers=args.workers)
        write_report(report, args.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DephmonError as exc:
        print(f"numerical-invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
