"""Compare the compiled and numpy kernels on the 15-node reference network.

    python benchmarks/bench_kernels.py [--time 20] [--repeat 3]

Both backends integrate the same number of RK4 steps; the table reports the
best wall time of ``--repeat`` runs and the speedup of the compiled path.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clustersync import _kernels
from clustersync.dynamics import Numerics, TangentLayout, owners, van_der_pol
from clustersync.examples import generate_example
from clustersync.netio import shifted_adjacency
from clustersync.partition import minimum_balanced_coloring
from clustersync.spectral import decompose


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--time", type=float, default=20.0, help="simulated time units per run")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sigma", type=float, default=0.3)
    args = ap.parse_args()
    if _kernels._ckernels is None:
        raise SystemExit("compiled kernels are not built; nothing to compare")

    model = van_der_pol()
    num = Numerics()
    At = shifted_adjacency(generate_example("fig2-case-a").network)
    p = minimum_balanced_coloring(At)
    d = decompose(At, p)
    lay = TangentLayout.from_blocks([t for o in owners(d) for t in o.tangents])
    n = num.steps(args.time)
    s0 = np.array([[1.0, 0.5], [-1.2, 0.3]])
    x0 = s0[np.asarray(p.cluster_of)] + 1e-4
    co = np.asarray(p.cluster_of)
    ref = np.array([c[0] for c in p.clusters])

    jobs = {
        f"quotient + {lay.n_blocks} tangents": lambda b: _kernels.benettin(
            model, d.Q, args.sigma, s0, lay, lay.initial_tangent(2), num.dt, n, n // 5, num.steps(1.0), backend=b),
        "full network (N=15)": lambda b: _kernels.network(
            model, At, args.sigma, x0, num.dt, n, n // 2, co, ref, backend=b),
    }
    print(f"{n} RK4 steps per run, best of {args.repeat}")
    print(f"{'kernel':28} {'cython [s]':>11} {'python [s]':>11} {'speedup':>8}")
    for name, job in jobs.items():
        tc = best_of(lambda: job("cython"), args.repeat)
        tp = best_of(lambda: job("python"), args.repeat)
        print(f"{name:28} {tc:11.4f} {tp:11.4f} {tp / tc:7.0f}x")


if __name__ == "__main__":
    main()
