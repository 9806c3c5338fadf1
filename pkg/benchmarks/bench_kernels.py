"""Compare the compiled propagation kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--points N] [--repeat R]

Prints the best-of-R wall time of each kernel for both backends and the
speed-up, plus the largest relative difference between their results.
"""

import argparse
import timeit

import numpy as np

from atomsphere import _kernels_py

try:
    from atomsphere import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def workloads(points: int):
    rng = np.random.default_rng(0)
    n = 2 * (points // 2) + 1
    h = 1e-3
    q = rng.uniform(-5.0, 50.0, n)
    qb = rng.uniform(-5.0, 50.0, (32, n))
    k2 = rng.uniform(0.1, 10.0, 64)
    ll = (np.arange(64) * (np.arange(64) + 1)).astype(float)
    y0 = np.full(64, 1e3)
    vq = rng.uniform(-2.0, 2.0, n)
    return {
        "numerov_wave (1 channel)": lambda m: m.numerov_wave(q, h, 0.0, 1e-6),
        "numerov_nodes (32 channels)": lambda m: m.numerov_nodes(qb, h),
        "logderiv_propagate (64 channels)": lambda m: m.logderiv_propagate(vq, 1.0, h, k2, ll,
                                                                           y0)[0],
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=20000, help="radial grid points")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':36s} {'python [s]':>11s} {'compiled [s]':>13s} {'speed-up':>9s} "
          f"{'max rel diff':>13s}")
    for name, fn in workloads(args.points).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:36s} {t_py:11.4f} {'-':>13s} {'-':>9s} {'-':>13s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        a, b = np.asarray(fn(_kernels_py), float), np.asarray(fn(compiled), float)
        diff = np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))
        print(f"{name:36s} {t_py:11.4f} {t_c:13.5f} {t_py / t_c:9.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
