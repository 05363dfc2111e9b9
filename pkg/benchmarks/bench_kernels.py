"""Compare the compiled and pure-Python simulation kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--replicates N] [--repeat R]

Each workload runs on one worker with the same seed on both backends; the
script checks that the outputs are bit-identical and prints wall times and
the speed-up.
"""
import argparse
import sys
import time

import numpy as np

from storrel import coldstore, ctmc, sim

WORKLOADS = {
    "markov (10,8) MDS": (lambda: ctmc.canonical_model(8, 2, 1 / 2000, 1 / 24), "markov"),
    "cold-full (6,3)": (lambda: coldstore.ColdModel(6, 3, exchange_rate=100.0), "cold-full"),
    "cold-approx (6,3)": (lambda: coldstore.ColdModel(6, 3, exchange_rate=100.0), "cold-approx"),
}


def time_backend(model, cfg, backend, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = sim.run_replicates(model, cfg, workers=1, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replicates", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    if "cython" not in sim.BACKENDS:
        print("compiled kernels are not built; reinstall with Cython available", file=sys.stderr)
        return 1
    print(f"{'workload':<20} {'python s':>10} {'cython s':>10} {'speed-up':>9}  identical")
    for name, (make, mode) in WORKLOADS.items():
        model = make()
        cfg = sim.SimConfig(args.replicates, seed=1, mode=mode)
        t_py, out_py = time_backend(model, cfg, "python", args.repeat)
        t_cy, out_cy = time_backend(model, cfg, "cython", args.repeat)
        same = np.array_equal(out_py.times, out_cy.times)
        print(f"{name:<20} {t_py:>10.3f} {t_cy:>10.3f} {t_py / t_cy:>8.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
