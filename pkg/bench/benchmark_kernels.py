"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage:
    python bench/benchmark_kernels.py [--n 2267] [--d 1024] [--k 3] [--reps 3]

Covers the three hot paths: the dense pairwise-distance sweep, per-row
nearest-neighbor selection, and the sparse propagation product (at both the
wide input width d and the narrow hidden width). The numba column is skipped
when numba is unavailable or disabled via SIMGCN_DISABLE_NUMBA.
"""

import argparse
import time

import numpy as np

from simgcn import accel, kernels
from simgcn.dataset import FeatureMatrix
from simgcn.graph import GraphConfig, build_graph


def timeit(fn, reps):
    fn()  # warm (jit compile, page faults)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def fmt(seconds):
    return f"{1000.0 * seconds:10.1f} ms"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2267)
    parser.add_argument("--d", type=int, default=1024)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--hidden", type=int, default=32)
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args()

    have_numba = accel.numba_enabled()
    print(f"active backend: {kernels.BACKEND} (numba available: {accel.HAS_NUMBA})")
    print(f"instance: n={args.n} d={args.d} k={args.k} hidden={args.hidden}\n")

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.n, args.d))
    _, S = build_graph(FeatureMatrix(x), "semi_supervised", config=GraphConfig(k=args.k))
    dist = kernels.pairwise_distances_numpy(x[: min(args.n, 600)])
    hid = rng.normal(size=(args.n, args.hidden))

    cases = [
        ("pairwise distances", lambda f: f(x)),
        (f"knn select (n={dist.shape[0]})", lambda f: f(dist, args.k)),
        (f"csr matmul (d={args.d})", lambda f: f(S.indptr, S.indices, S.data, x)),
        (f"csr matmul (d={args.hidden})", lambda f: f(S.indptr, S.indices, S.data, hid)),
    ]
    impls = [
        (kernels.pairwise_distances_numpy, kernels.pairwise_distances_numba),
        (kernels.knn_select_numpy, kernels.knn_select_numba),
        (kernels.csr_matmul_numpy, kernels.csr_matmul_numba),
        (kernels.csr_matmul_numpy, kernels.csr_matmul_numba),
    ]

    header = f"{'kernel':28s} {'numpy':>13s} {'numba':>13s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for (label, call), (np_impl, nb_impl) in zip(cases, impls):
        t_np = timeit(lambda: call(np_impl), args.reps)
        if have_numba and nb_impl is not None:
            t_nb = timeit(lambda: call(nb_impl), args.reps)
            print(f"{label:28s} {fmt(t_np)} {fmt(t_nb)} {t_np / t_nb:8.1f}x")
        else:
            print(f"{label:28s} {fmt(t_np)} {'(skipped)':>13s} {'-':>9s}")


if __name__ == "__main__":
    main()
