"""Side-by-side timing of the numba kernels against the numpy fallback.

Usage:
    python -m contendscope.benchmarks [--repeats N] [--tasks N]

Times the apportioning, penalty-integral and blame kernels on synthetic
per-task slice data shaped like a mid-size trace, then an end-to-end
slicing pass over a simulated workload under both backends.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .kernels import numba_impl, numpy_impl


def _case(rng, n_slices, n_windows, r=9):
    span = 60.0
    slice_bounds = np.concatenate(
        [[0.0], np.sort(rng.uniform(0.5, span - 0.5, n_slices - 1)), [span]]
    )
    win_bounds = np.concatenate(
        [[0.0], np.sort(rng.uniform(0.5, span - 0.5, n_windows - 1)), [span]]
    )
    deltas = rng.uniform(0, 4, (n_windows, r))
    dtau = np.diff(slice_bounds)
    wt = rng.uniform(0, 1, (n_slices, r)) * dtau[:, None] * 0.4
    ct = rng.uniform(0, 1, (n_slices, r)) * dtau[:, None] * 0.4
    ra = np.where(rng.random((n_slices, r)) < 0.3, 0.0, rng.uniform(0.1, 9, (n_slices, r)))
    ra2 = np.where(rng.random((n_slices, r)) < 0.3, 0.0, rng.uniform(0.1, 9, (n_slices, r)))
    ideal = rng.uniform(0.01, 1.0, r)
    return win_bounds, deltas, slice_bounds, wt, ct, ra, ra2, dtau, ideal


def _time(fn, repeats) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats: int = 5, tasks: int = 2000) -> list[dict]:
    rng = np.random.default_rng(0)
    cases = [_case(rng, int(rng.integers(8, 40)), int(rng.integers(4, 25))) for _ in range(tasks)]

    def run_apportion(impl):
        for win, deltas, bounds, *_ in cases:
            impl.apportion(win, deltas, bounds)

    def run_integrals(impl):
        for _, _, _, wt, ct, ra, _, dtau, _ in cases:
            impl.ratp_integrals(wt, ct, ra, dtau)
            impl.ratp_blocked_integrals(wt, ra, dtau)

    def run_blame(impl):
        for _, _, _, wt, ct, ra, ra2, dtau, _ in cases:
            impl.blame_blocked_sums(wt, ra, ra2)
            impl.blame_full_sums(wt, ct, ra, wt, ct, ra2, dtau)

    def run_slowdown(impl):
        for _, _, _, wt, ct, ra, _, dtau, ideal in cases:
            impl.slowdown_sums(wt, ct, ra, dtau, ideal)

    rows = []
    for name, runner in (
        ("apportion", run_apportion),
        ("penalty-integrals", run_integrals),
        ("pair-blame", run_blame),
        ("slowdown", run_slowdown),
    ):
        runner(numba_impl)  # JIT warmup
        t_numba = _time(lambda: runner(numba_impl), repeats)
        t_numpy = _time(lambda: runner(numpy_impl), repeats)
        rows.append(
            {
                "kernel": name,
                "numba_s": t_numba,
                "numpy_s": t_numpy,
                "speedup": t_numpy / t_numba if t_numba > 0 else float("inf"),
            }
        )
    return rows


def bench_pipeline(repeats: int = 3) -> list[dict]:
    import os
    import subprocess
    import sys
    import tempfile

    code = (
        "import time\n"
        "from contendscope.sim import scenario_library, simulate\n"
        "from contendscope.graph import analyze\n"
        "cfg = scenario_library(seed=5)['cpu-internal-hog']\n"
        "trace, _ = simulate(cfg)\n"
        "analyze(trace, ['Qt'])\n"  # warm up the JIT / cache load
        "t0 = time.perf_counter()\n"
        "for _ in range(20):\n"
        "    analyze(trace, ['Qt'])\n"
        "print((time.perf_counter() - t0) / 20)\n"
    )
    rows = []
    for backend, flag in (("numba", "1"), ("numpy", "0")):
        env = dict(os.environ, CONTENDSCOPE_NUMBA=flag)
        best = float("inf")
        for _ in range(repeats):
            out = subprocess.run(
                [sys.executable, "-c", code], env=env, capture_output=True, text=True
            )
            best = min(best, float(out.stdout.strip()))
        rows.append({"backend": backend, "analyze_s": best})
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--tasks", type=int, default=2000)
    parser.add_argument("--pipeline", action="store_true",
                        help="also time a full graph build per backend")
    args = parser.parse_args(argv)

    print(f"{'kernel':<20} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for row in bench_kernels(args.repeats, args.tasks):
        print(
            f"{row['kernel']:<20} {row['numba_s']:>9.4f}s {row['numpy_s']:>9.4f}s"
            f" {row['speedup']:>8.1f}x"
        )
    if args.pipeline:
        print()
        for row in bench_pipeline():
            print(f"analyze ({row['backend']}): {row['analyze_s']:.4f}s per build")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
