"""Compare the compiled pooling kernel against the pure-Python fallback.

Usage:
    python3 benchmarks/bench_pooling.py [--tokens N] [--spans S] [--repeats R]

Builds one synthetic banded-attention instance, pools every span pair
under all three modes through both kernel paths, and reports wall-clock
medians.  The two paths must agree bit for bit; the benchmark asserts it.
"""

import argparse
import statistics
import time

import numpy as np

from spanwalk._kernels import USING_NUMBA, pool_pairs, pool_pairs_py


def build_instance(n_tokens, n_spans, window, seed):
    rng = np.random.default_rng(seed)
    band = rng.random((n_tokens, 2 * window + 1), dtype=np.float32)
    bounds = np.sort(rng.choice(n_tokens, size=2 * n_spans, replace=False))
    starts = bounds[0::2].astype(np.int64)
    ends = np.maximum(bounds[1::2], starts + 1).astype(np.int64)
    n_overlay = max(n_spans * 4, 8)
    keys = np.sort(
        rng.choice(n_tokens * n_tokens, size=n_overlay, replace=False)
    ).astype(np.int64)
    vals = rng.random(n_overlay).astype(np.float64)
    return band, starts, ends, keys, vals


def time_path(fn, args, repeats):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tokens", type=int, default=4096)
    ap.add_argument("--spans", type=int, default=48)
    ap.add_argument("--window", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    band, starts, ends, keys, vals = build_instance(
        args.tokens, args.spans, args.window, args.seed
    )
    print(f"tokens={args.tokens} spans={args.spans} window={args.window} "
          f"compiled={USING_NUMBA}")
    if not USING_NUMBA:
        print("compiled path unavailable (SPANWALK_NO_NUMBA set or import failed); "
              "timing the fallback against itself")

    for mode, name in ((0, "max"), (1, "min"), (2, "mean")):
        call = (band, args.window, args.tokens, starts, ends, mode, keys, vals)
        w_fast, p_fast, b_fast = pool_pairs(*call)  # warm-up compiles
        w_py, p_py, b_py = pool_pairs_py(*call)
        assert np.array_equal(w_fast, w_py)
        assert np.array_equal(p_fast, p_py)
        assert np.array_equal(b_fast, b_py)
        fast = time_path(pool_pairs, call, args.repeats)
        slow = time_path(pool_pairs_py, call, args.repeats)
        ratio = slow / fast if fast > 0 else float("inf")
        print(f"{name:>5}: compiled {fast * 1e3:8.2f} ms   "
              f"python {slow * 1e3:8.2f} ms   speedup {ratio:6.1f}x")


if __name__ == "__main__":
    main()
