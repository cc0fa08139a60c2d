#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot operations of the chunk-statistics pipeline (per-sample
chunk means over the full sample matrix, and per-group mean/variance of
the chunk means) on synthetic data of the default 448-chunk layout.

Usage: python benchmarks/bench_kernels.py [--samples N] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gazechunks import _kernels_np

try:
    from gazechunks import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        times.append(time.perf_counter() - started)
    return min(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=6000)
    parser.add_argument("--chunks", type=int, default=448)
    parser.add_argument("--chunk-size", type=int, default=16)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    total = args.chunks * args.chunk_size
    x = np.ascontiguousarray(rng.standard_normal((args.samples, total)))
    rows = np.ascontiguousarray(
        rng.choice(args.samples, size=args.samples // 3, replace=False), dtype=np.intp
    )

    print(f"matrix: {args.samples} x {total} ({x.nbytes / 1e6:.0f} MB), best of {args.repeats}")
    header = f"{'kernel':<18}{'numpy':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))

    np_cm = best_of(lambda: _kernels_np.chunk_means_batch(x, args.chunk_size), args.repeats)
    cm_np = _kernels_np.chunk_means_batch(x, args.chunk_size)
    if compiled is not None:
        cy_cm = best_of(lambda: compiled.chunk_means_batch(x, args.chunk_size), args.repeats)
        cm_cy = compiled.chunk_means_batch(x, args.chunk_size)
        assert np.allclose(cm_np, cm_cy, rtol=1e-12)
        print(f"{'chunk_means':<18}{np_cm * 1e3:>10.1f}ms{cy_cm * 1e3:>10.1f}ms{np_cm / cy_cm:>9.2f}x")
    else:
        print(f"{'chunk_means':<18}{np_cm * 1e3:>10.1f}ms{'n/a':>12}{'':>10}")

    np_gs = best_of(lambda: _kernels_np.group_mean_var(cm_np, rows), args.repeats)
    if compiled is not None:
        cy_gs = best_of(lambda: compiled.group_mean_var(cm_np, rows), args.repeats)
        m1, v1 = _kernels_np.group_mean_var(cm_np, rows)
        m2, v2 = compiled.group_mean_var(cm_np, rows)
        assert np.allclose(m1, m2, rtol=1e-12) and np.allclose(v1, v2, rtol=1e-10)
        print(f"{'group_mean_var':<18}{np_gs * 1e3:>10.2f}ms{cy_gs * 1e3:>10.2f}ms{np_gs / cy_gs:>9.2f}x")
    else:
        print(f"{'group_mean_var':<18}{np_gs * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")

    if compiled is None:
        print("\ncompiled extension not built; only the numpy fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
