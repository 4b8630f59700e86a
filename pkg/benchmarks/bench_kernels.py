"""Benchmark the compiled step kernels against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--n-qubits 2] [--steps 1000]
                                       [--trajectories 500] [--repeats 3]

Runs identical workloads through dephmon._kernels_py and (when built)
dephmon._kernels_cy, reports per-step timings, the speedup, and the maximum
numerical deviation between the two backends.
"""

import argparse
import math
import time

import numpy as np

from dephmon import _kernels_py
from dephmon.operators import ghz_state
from dephmon.trajectories import trajectory_rng

try:
    from dephmon import _kernels_cy
except ImportError:
    _kernels_cy = None


def _workloads(n_qubits, n_steps, n_traj, dt, seed=123):
    rho0 = ghz_state(n_qubits)
    rng = trajectory_rng(seed, 0)
    dw = rng.standard_normal((n_traj, n_steps, n_qubits)) * math.sqrt(dt)
    jumps = (rng.random((n_traj, n_steps, n_qubits)) < 0.5 * dt).astype(np.uint8)
    steps = np.array([n_steps], dtype=np.int64)
    return [
        (
            "pd  (tangent)",
            "run_pd_batch",
            (rho0, 1.0, 0.4, dt, jumps, steps),
            {"want_tangent": True},
        ),
        (
            "hd  (tangent)",
            "run_hd_batch",
            (rho0, 1.0, 1.0, 0.8, 0.3, dt, dw, steps),
            {"want_tangent": True, "want_current": False},
        ),
        (
            "hd  (plain)",
            "run_hd_batch",
            (rho0, 1.0, 1.0, 0.8, 0.3, dt, dw, steps),
            {"want_tangent": False, "want_current": False},
        ),
    ]


def _time(func, args, kwargs, repeats):
    best = math.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = func(*args, **kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _max_dev(a, b):
    worst = 0.0
    for x, y in zip(a, b):
        if x is not None and y is not None:
            worst = max(worst, float(np.max(np.abs(x - y))))
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-qubits", type=int, default=2)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--trajectories", type=int, default=500)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    total = args.trajectories * args.steps
    print(
        f"N={args.n_qubits} steps={args.steps} trajectories={args.trajectories} "
        f"dt={args.dt:g} ({total} trajectory-steps)"
    )
    if _kernels_cy is None:
        print("compiled backend not built; timing the numpy fallback only")

    header = f"{'workload':<14} {'numpy':>12} {'cython':>12} {'speedup':>8} {'max dev':>10}"
    print(header)
    print("-" * len(header))
    for label, fname, fargs, fkwargs in _workloads(
        args.n_qubits, args.steps, args.trajectories, args.dt
    ):
        t_py, out_py = _time(getattr(_kernels_py, fname), fargs, fkwargs, args.repeats)
        ns_py = t_py / total * 1e9
        if _kernels_cy is None:
            print(f"{label:<14} {ns_py:>9.0f} ns/step {'-':>12} {'-':>8} {'-':>10}")
            continue
        t_cy, out_cy = _time(getattr(_kernels_cy, fname), fargs, fkwargs, args.repeats)
        ns_cy = t_cy / total * 1e9
        dev = _max_dev(out_py, out_cy)
        print(
            f"{label:<14} {ns_py:>9.0f} ns {ns_cy:>9.0f} ns {t_py / t_cy:>7.2f}x {dev:>10.2e}"
        )


if __name__ == "__main__":
    main()
