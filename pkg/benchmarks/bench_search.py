#!/usr/bin/env python3
"""Benchmark the flat-index top-k kernels: numba selection vs numpy argsort.

Both paths share the float32 matrix-vector scoring; the difference is the
selection step. Run:

    python3 benchmarks/bench_search.py --sizes 10000 100000 --dim 256 --k 7
"""

import argparse
import time

import numpy as np

from hopsynth._kernels import HAS_NUMBA, topk_numba, topk_numpy


def bench(fn, scores, k, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn(scores, k)
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--k", type=int, default=7)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"numba available: {HAS_NUMBA}")
    print(f"{'n':>10} {'matvec ms':>10} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for n in args.sizes:
        matrix = rng.standard_normal((n, args.dim)).astype(np.float32)
        query = rng.standard_normal(args.dim).astype(np.float32)
        scores = matrix @ query
        if HAS_NUMBA:
            topk_numba(scores, args.k)  # compile outside the timing loop
        t_matvec = bench(lambda s, k: matrix @ query, scores, args.k, args.repeats)
        t_numpy = bench(topk_numpy, scores, args.k, args.repeats)
        t_numba = bench(topk_numba, scores, args.k, args.repeats) if HAS_NUMBA else float("nan")
        agree = (
            np.array_equal(topk_numba(scores, args.k), topk_numpy(scores, args.k))
            if HAS_NUMBA
            else True
        )
        speedup = t_numpy / t_numba if HAS_NUMBA else float("nan")
        print(
            f"{n:>10} {1e3 * t_matvec:>10.3f} {1e3 * t_numpy:>10.3f} "
            f"{1e3 * t_numba:>10.3f} {speedup:>7.1f}x"
            + ("" if agree else "  MISMATCH")
        )


if __name__ == "__main__":
    main()
