"""Benchmark the numba-compiled workload kernels against the numpy/Python
fallback.

Usage: python benchmarks/bench_kernels.py [--n-requests N] [--repeats R]

Both implementations are imported directly so a single run compares them
regardless of the TIERSIM_NUMBA environment flag; a first untimed call
absorbs JIT compilation.
"""

import argparse
import time

import numpy as np

from tiersim import kernels


def time_call(fn, *args, repeats=5):
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_irm(n, repeats):
    rng = np.random.default_rng(0)
    slots = rng.integers(0, 512, size=n).astype(np.int64)
    args = (slots, 50, 512)
    py = time_call(kernels._irm_select_pages_py, *args, repeats=repeats)
    rows = [("irm_select_pages", "numpy/python", py, 1.0)]
    if kernels.HAVE_NUMBA:
        nb = time_call(kernels._irm_select_pages_nb, *args, repeats=repeats)
        rows.append(("irm_select_pages", "numba", nb, py / nb))
        assert np.array_equal(kernels._irm_select_pages_py(*args),
                              kernels._irm_select_pages_nb(*args))
    return rows


def bench_poisson(n, repeats):
    rng = np.random.default_rng(1)
    arrivals = np.cumsum(rng.exponential(0.01, size=n))
    u_page = rng.random(n)
    n_pages = max(200, n // 5)
    interval = max(1, n // n_pages)
    intro_idx = np.minimum(np.arange(n_pages) * interval, n - 1)
    args = (arrivals, u_page, arrivals[intro_idx], interval, 2.0)
    py = time_call(kernels._poisson_select_pages_py, *args, repeats=repeats)
    rows = [("poisson_select_pages", "numpy/python", py, 1.0)]
    if kernels.HAVE_NUMBA:
        nb = time_call(kernels._poisson_select_pages_nb, *args,
                       repeats=repeats)
        rows.append(("poisson_select_pages", "numba", nb, py / nb))
        assert np.array_equal(kernels._poisson_select_pages_py(*args),
                              kernels._poisson_select_pages_nb(*args))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-requests", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"numba available: {kernels.HAVE_NUMBA} "
          f"(active path: {'numba' if kernels.USE_NUMBA else 'fallback'})")
    print(f"n_requests = {args.n_requests}, best of {args.repeats}\n")
    header = f"{'kernel':<24} {'path':<14} {'seconds':>10} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for rows in (bench_irm(args.n_requests, args.repeats),
                 bench_poisson(args.n_requests, args.repeats)):
        for kernel, path, secs, speedup in rows:
            print(f"{kernel:<24} {path:<14} {secs:>10.4f} {speedup:>8.1f}x")


if __name__ == "__main__":
    main()
