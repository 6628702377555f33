"""Time the RK4 oracle on the numba kernel and on the pure-numpy fallback.

    python3 benchmarks/bench_oracle.py [--M 30] [--t-max 50] [--step 1e-3] [--repeat 3]
"""

import argparse
import time

import numpy as np

from qtripod.dynamics import AtomInit, ModelParams
from qtripod.oracle import IntegratorOptions, integrate_reduced
from qtripod.qalgebra import DeformationSpec, FieldSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=30)
    ap.add_argument("--t-max", type=float, default=50.0)
    ap.add_argument("--step", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    p = ModelParams(FieldSpec(args.M, 0.07, DeformationSpec(0.9)), mu=np.pi / 2, deltas=2.0, chi=0.1)
    init = AtomInit((1, 0, 0, 0))
    grid = np.linspace(0.0, args.t_max, 501)

    # one warm-up call so numba compilation (or cache load) is not timed
    integrate_reduced(p, init, grid[:2], IntegratorOptions(args.step, backend="numba"))

    results = {}
    for backend in ("numba", "numpy"):
        opts = IntegratorOptions(args.step, backend=backend)
        elapsed, traj = best_of(lambda: integrate_reduced(p, init, grid, opts), args.repeat)
        results[backend] = (elapsed, traj.psi)
        steps = int(round(args.t_max / args.step))
        print(f"{backend:6s} {elapsed:8.3f} s  ({steps} steps x {args.M + 1} blocks)")

    diff = np.max(np.abs(results["numba"][1] - results["numpy"][1]))
    print(f"speedup numba/numpy: {results['numpy'][0] / results['numba'][0]:.1f}x, max |diff| {diff:.1e}")


if __name__ == "__main__":
    main()
