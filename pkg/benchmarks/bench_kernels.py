#!/usr/bin/env python3
"""Timing comparison of the compiled and pure-python kernel backends.

The micro section imports both kernel modules side by side and times the
hot array operations across sizes. The end-to-end section re-runs the
headline solver in a subprocess per backend, because the package commits
to one backend at import time.

Usage: python3 benchmarks/bench_kernels.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from splitflow._kernels import _pykernels

try:
    from splitflow._kernels import _cykernels
except ImportError:
    _cykernels = None


def _seconds_per_call(fn) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=3, number=number)) / number


def _ops(mod, x, y, lo, hi):
    return {
        "dot": lambda: mod.dot(x, y),
        "nrm2": lambda: mod.nrm2(x),
        "axpy": lambda: mod.axpy(0.7, x, y),
        "combine": lambda: mod.combine(2.0, x, -1.0, y),
        "soft_threshold": lambda: mod.soft_threshold(x, 0.3),
        "clamp": lambda: mod.clamp(x, lo, hi),
    }


def bench_micro(sizes):
    rng = np.random.default_rng(0)
    print(f"{'op':<16}{'n':>8}{'python':>12}{'compiled':>12}{'speedup':>9}")
    for n in sizes:
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        lo = np.full(n, -0.5)
        hi = np.full(n, 0.5)
        py = _ops(_pykernels, x, y, lo, hi)
        cy = _ops(_cykernels, x, y, lo, hi) if _cykernels is not None else None
        for name in py:
            t_py = _seconds_per_call(py[name])
            if cy is None:
                print(f"{name:<16}{n:>8}{t_py * 1e6:>10.2f}us"
                      f"{'-':>12}{'-':>9}")
                continue
            t_cy = _seconds_per_call(cy[name])
            print(f"{name:<16}{n:>8}{t_py * 1e6:>10.2f}us"
                  f"{t_cy * 1e6:>10.2f}us{t_py / t_cy:>8.1f}x")


_SOLVE_SNIPPET = (
    "import time\n"
    "from splitflow import _kernels, problems, solvers\n"
    "p = problems.make_skew_vi(100, seed=1)\n"
    "cfg = solvers.SolverConfig(lam=0.3, tol=0.0, max_iters={iters})\n"
    "t0 = time.perf_counter()\n"
    "solvers.run('shadow-dr', p, cfg)\n"
    "print(_kernels.BACKEND, time.perf_counter() - t0)\n"
)


def bench_solver(iters: int):
    print(f"\nshadow-dr on the rotation instance, dim 100, "
          f"{iters} fixed iterations:")
    times = {}
    for backend in ("python", "compiled"):
        env = dict(os.environ, SPLITFLOW_KERNELS=backend)
        out = subprocess.run(
            [sys.executable, "-c", _SOLVE_SNIPPET.format(iters=iters)],
            env=env, capture_output=True, text=True,
        )
        if out.returncode != 0:
            print(f"  {backend:<10} unavailable "
                  f"({out.stderr.strip().splitlines()[-1]})")
            continue
        name, wall = out.stdout.split()
        times[backend] = float(wall)
        print(f"  {name:<10} {float(wall):.3f} s")
    if len(times) == 2:
        print(f"  speedup    {times['python'] / times['compiled']:.1f}x")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true",
                        help="small sizes and a short solver run")
    args = parser.parse_args(argv)
    if _cykernels is None:
        print("compiled backend not built; timing the python backend only")
    sizes = (64, 4096) if args.quick else (64, 1024, 16384, 262144)
    bench_micro(sizes)
    bench_solver(500 if args.quick else 3000)
    return 0


if __name__ == "__main__":
    sys.exit(main())
