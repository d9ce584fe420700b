#!/usr/bin/env python3
"""Benchmark the compiled observation kernels against the numpy fallback.

Times the three per-observation kernels (objective sum, entry gradient,
boundary gradient) on synthetic workloads of increasing size and prints the
per-call time of each backend plus the speedup.

Usage: python3 benchmarks/bench_kernels.py [--sizes 10000,100000,1000000]
"""

import argparse
import time

import numpy as np

from qtensor import _obsloops_np

try:
    from qtensor import _obsloops
except ImportError:
    _obsloops = None


def _workload(n, levels=4, seed=0):
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(rng.uniform(-1, 1, n))
    labels = rng.integers(1, levels + 1, n).astype(np.int64)
    omegas = np.ascontiguousarray(np.linspace(-0.5, 0.5, levels - 1))
    return x, labels, omegas


def _time(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(sizes, model_id=0, sigma=0.25):
    rows = []
    for n in sizes:
        x, labels, omegas = _workload(n)
        at1 = np.ascontiguousarray(x[labels == 1])
        at2 = np.ascontiguousarray(x[labels == 2])
        for name, args in [
            ("nll", (x, labels, omegas, sigma, model_id)),
            ("dneg_log_f", (x, labels, omegas, sigma, model_id)),
            ("boundary_grad", (at1, at2, 1, omegas, sigma, model_id)),
        ]:
            t_np = _time(lambda: getattr(_obsloops_np, name)(*args))
            if _obsloops is not None:
                t_cy = _time(lambda: getattr(_obsloops, name)(*args))
                check_np = getattr(_obsloops_np, name)(*args)
                check_cy = getattr(_obsloops, name)(*args)
                gap = float(np.max(np.abs(np.asarray(check_np) - np.asarray(check_cy))))
                rel = gap / (1.0 + float(np.max(np.abs(np.asarray(check_np)))))
                rows.append((n, name, t_np, t_cy, t_np / t_cy, rel))
            else:
                rows.append((n, name, t_np, None, None, None))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=str, default="10000,100000,1000000")
    args = parser.parse_args()
    sizes = [int(tok) for tok in args.sizes.split(",")]

    if _obsloops is None:
        print("compiled backend not available; timing the numpy fallback only")
    header = f"{'n':>9}  {'kernel':<14} {'numpy':>10} {'cython':>10} {'speedup':>8} {'rel gap':>9}"
    print(header)
    print("-" * len(header))
    for n, name, t_np, t_cy, speedup, gap in bench(sizes):
        if t_cy is None:
            print(f"{n:>9}  {name:<14} {t_np * 1e3:>8.2f}ms {'-':>10} {'-':>8} {'-':>9}")
        else:
            print(
                f"{n:>9}  {name:<14} {t_np * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
                f"{speedup:>7.1f}x {gap:>9.1e}"
            )


if __name__ == "__main__":
    main()
