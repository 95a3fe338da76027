"""Time the compiled and numpy sampling kernels on the same chains.

    python3 benchmarks/bench_sampler.py [--samples 20000] [--repeat 3]

Both kernels consume the same pre-drawn random numbers, so besides the
timings the script checks that they return identical samples.
"""

import argparse
import time

import numpy as np

from rbmest._backend import KERNELS
from rbmest.rbm import RBM
from rbmest.sampler import ParallelTempering, SamplerConfig

SIZES = [(2, 2), (4, 4), (8, 8), (12, 12), (16, 32)]


def run(rbm, backend, n_samples, seed=0):
    pt = ParallelTempering(rbm, SamplerConfig(seed=seed, backend=backend))
    t0 = time.perf_counter()
    pt.burn_in()
    samples = pt.sample(n_samples)
    return time.perf_counter() - t0, samples


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = sorted(KERNELS)
    if "compiled" not in backends:
        print("compiled kernel not built; timing the numpy kernel only")
    print(f"{'N':>3} {'H':>3} " + " ".join(f"{b + ' [s]':>14}" for b in backends) + f" {'speedup':>8} {'identical':>9}")
    for n, h in SIZES:
        rbm = RBM.random(n, h, scale=0.5, seed=n)
        best, outs = {}, {}
        for b in backends:
            times = []
            for _ in range(args.repeat):
                t, outs[b] = run(rbm, b, args.samples)
                times.append(t)
            best[b] = min(times)
        same = all(np.array_equal(outs[backends[0]], o) for o in outs.values())
        speed = best["python"] / best["compiled"] if "compiled" in best else float("nan")
        print(f"{n:>3} {h:>3} " + " ".join(f"{best[b]:>14.3f}" for b in backends) + f" {speed:>8.1f} {str(same):>9}")


if __name__ == "__main__":
    main()
