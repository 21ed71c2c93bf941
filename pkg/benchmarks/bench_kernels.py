"""Compare the numba and pure-numpy Jacobi SVD kernels.

Usage: python benchmarks/bench_kernels.py [--sizes 32 64 128 256] [--repeat 3]

Both kernels are called through ``jacobi_svd`` on the same random matrices,
so the timings include the shared QR preconditioning. The numba kernel is
compiled once before timing starts.
"""

import argparse
import time

import numpy as np

from mrtensor import _kernels
from mrtensor.svd import jacobi_svd


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()

    rng = np.random.default_rng(0)
    kernels = {"numpy": _kernels.jacobi_sweeps_numpy}
    if _kernels.HAS_NUMBA:
        kernels["numba"] = _kernels.jacobi_sweeps_numba
        jacobi_svd(rng.standard_normal((8, 8)), kernel=kernels["numba"])  # compile
    else:
        print("numba unavailable; timing the numpy kernel only")

    print(f"{'n':>6} " + " ".join(f"{name:>12}" for name in kernels) + f" {'max |ds|':>12}")
    for n in args.sizes:
        A = rng.standard_normal((n, n))
        times, spectra = [], []
        for kernel in kernels.values():
            times.append(best_time(lambda k=kernel: jacobi_svd(A, kernel=k), args.repeat))
            spectra.append(jacobi_svd(A, kernel=kernel)[1])
        gap = max(float(np.max(np.abs(s - spectra[0]))) for s in spectra)
        print(f"{n:>6} " + " ".join(f"{t:>11.4f}s" for t in times) + f" {gap:>12.2e}")


if __name__ == "__main__":
    main()
