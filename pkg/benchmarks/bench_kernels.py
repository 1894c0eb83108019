"""Compare the numba kernels with their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--trials 2000] [--repeat 3]

The numba timings exclude compilation (one warm-up call first). Setting
LOCALIZE_DISABLE_JIT=1 makes the library pick the numpy path by default;
here both backends are requested explicitly.
"""
import argparse
import time

import numpy as np

from localize.generators import random_ising, random_potts
from localize.localization import LocalizationConfig, simulate
from localize.measure import gibbs_measure
from localize.meanfield import mf_optimize


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_paths(trials, repeat):
    rng = np.random.default_rng(0)
    mu = gibbs_measure(random_ising(6, rng))
    Q = np.eye(mu.dim)
    cfg = LocalizationConfig(trials=trials, seed=0, Q=Q)
    out = {}
    for backend in ("numba", "numpy"):
        run = lambda: simulate(mu, Q, cfg, horizon=2.0, snapshot_times=[0.5, 1.0, 2.0],
                               backend=backend)
        if backend == "numba":
            simulate(mu, Q, cfg.with_(trials=2), backend=backend)
        out[backend] = _best_of(run, repeat)
    steps = trials * 2000
    return out, steps


def bench_meanfield(repeat):
    rng = np.random.default_rng(1)
    model = random_potts(40, 3, rng, coupling=0.2)
    out = {}
    for backend in ("numba", "numpy"):
        run = lambda: mf_optimize(model, restarts=8, backend=backend)
        if backend == "numba":
            run()
        out[backend] = _best_of(run, repeat)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    paths, steps = bench_paths(args.trials, args.repeat)
    print(f"localization paths: n=6 Ising (64 atoms), {args.trials} trials to t=2")
    for name, sec in paths.items():
        print(f"  {name:6s} {sec:8.3f} s   {1e6 * sec / steps:6.3f} us/step")
    print(f"  speedup {paths['numpy'] / paths['numba']:.2f}x")

    mf = bench_meanfield(args.repeat)
    print("mean-field ascent: Potts n=40 k=3, 9 starts")
    for name, sec in mf.items():
        print(f"  {name:6s} {sec:8.3f} s")
    print(f"  speedup {mf['numpy'] / mf['numba']:.2f}x")


if __name__ == "__main__":
    main()
