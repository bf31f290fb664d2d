"""Compare the numba and numpy paths of the two hot kernels.

    python3 benchmarks/bench_kernels.py [--shots N] [--settings N] [--repeat R]

Both paths are checked for agreement before timing.  The first numba call
(compilation, or loading the on-disk cache) is timed separately.
"""

import argparse
import time

import numpy as np

from rpesim import _kernels
from rpesim.measurement import random_settings

HARDY = [0.5, 0.375, 0.125]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--shots", type=int, default=2_000_000)
    parser.add_argument("--settings", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled (RPESIM_DISABLE_NUMBA); timing numpy only")

    t = np.diag([1.0, -1.0, 1.0])
    vecs = random_settings(args.settings, np.random.default_rng(0))

    jobs = {
        f"sample_counts ({args.shots} shots)":
            lambda b: _kernels.sample_counts(HARDY, 42, args.shots, backend=b),
        f"chsh_scan ({args.settings} settings)":
            lambda b: _kernels.chsh_scan(t, *vecs, backend=b),
    }
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])

    print(f"{'kernel':<36}{'backend':<9}{'first call':>12}{'best':>12}{'speed-up':>10}")
    for name, job in jobs.items():
        results = {}
        base = None
        for b in backends:
            t0 = time.perf_counter()
            results[b] = job(b)
            first = time.perf_counter() - t0
            best = best_of(lambda: job(b), args.repeat)
            base = base or best
            print(f"{name:<36}{b:<9}{first * 1e3:>10.2f}ms{best * 1e3:>10.2f}ms{base / best:>9.1f}x")
        if len(results) == 2:
            a, c = results["numpy"], results["numba"]
            same = np.array_equal(a, c) if a.dtype.kind == "i" else np.allclose(a, c, atol=1e-12)
            if not same:
                raise SystemExit(f"{name}: backends disagree")


if __name__ == "__main__":
    main()
