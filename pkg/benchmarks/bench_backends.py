"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on a representative workload with both backends
(warming the JIT first) and prints a timing table. Works regardless of
the CROSSDYN_BACKEND setting since it addresses both implementations
directly; numba rows are skipped when numba is not installed.

Usage: python benchmarks/bench_backends.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from crossdyn import _kernels


def timeit(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def banded_stochastic_csr(n=900, halfwidth=55, seed=0):
    """Row-stochastic band matrix shaped like a fitted transition chain."""
    from scipy.sparse import csr_matrix

    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    for i in range(n):
        lo = max(0, i - halfwidth)
        hi = min(n, i + halfwidth + 1)
        w = rng.random(hi - lo) + 1e-3
        w /= w.sum()
        rows.extend([i] * (hi - lo))
        cols.extend(range(lo, hi))
        vals.extend(w)
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


def workloads():
    rng = np.random.default_rng(42)
    samples = rng.standard_normal(5000)
    queries = rng.uniform(-3, 3, 2000)

    nodes = np.linspace(-5, 5, 32769)
    drift = -nodes / (1 + nodes**2)  # bounded mean-reverting pull
    noise = rng.standard_normal(1_000_000)

    short_noise = rng.standard_normal(20_000)
    small_samples = rng.standard_normal(2000)

    wt = banded_stochastic_csr().transpose().tocsr()
    start = np.full(wt.shape[0], 1.0 / wt.shape[0])

    return [
        (
            "gauss_kernel_sums (2e3 x 5e3)",
            "gauss_kernel_sums",
            (queries, samples, 0.2),
        ),
        (
            "em_path_table (1e6 steps)",
            "em_path_table",
            (0.1, drift, -5.0, (32769 - 1) / 10.0, 0.002, 0.06, noise),
        ),
        (
            "em_path_exact (2e4 x 2e3)",
            "em_path_exact",
            (0.1, small_samples, 0.25, 0.002, 0.06, short_noise),
        ),
        (
            "power_iteration (900-state band)",
            "power_iteration",
            (
                wt.indptr.astype(np.int64),
                wt.indices.astype(np.int64),
                wt.data.astype(np.float64),
                start,
                1e-10,
                1_000_000,
            ),
        ),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"numba available: {_kernels.NUMBA_AVAILABLE}")
    header = f"{'kernel':<34} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in workloads():
        t_np = timeit(getattr(_kernels, f"{name}_numpy"), call_args, args.repeats)
        if _kernels.NUMBA_AVAILABLE:
            jit = getattr(_kernels, f"{name}_numba")
            jit(*call_args)  # warm the JIT outside the timed region
            t_nb = timeit(jit, call_args, args.repeats)
            print(f"{label:<34} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms {t_np / t_nb:>8.1f}x")
        else:
            print(f"{label:<34} {t_np * 1e3:>10.2f}ms {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
