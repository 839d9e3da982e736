"""Pooling kernels for span-pair edge weights.

The inner loop scans every token pair of every span pair against the local
band plus a sparse overlay of bridged edges.  It is compiled with numba by
default; setting SPANWALK_NO_NUMBA=1 (or failing to import numba) selects the
identical uncompiled path.  Both callables are kept so the benchmark can
compare them.

Mean pooling accumulates in ascending (src, dst) order with a float64
accumulator; the brute-force oracle does the same, so results are bit-equal.
"""

from __future__ import annotations

import os

import numpy as np

POOL_MAX = 0
POOL_MIN = 1
POOL_MEAN = 2


def _pool_pairs(band, window, n_tokens, starts, ends, mode, overlay_keys, overlay_vals):
    n_spans = starts.shape[0]
    n_overlay = overlay_keys.shape[0]
    weights = np.zeros((n_spans, n_spans), dtype=np.float64)
    present = np.zeros((n_spans, n_spans), dtype=np.uint8)
    bridged = np.zeros((n_spans, n_spans), dtype=np.uint8)
    for a in range(n_spans):
        for b in range(n_spans):
            if a == b:
                continue
            local_best = 0.0
            local_worst = 0.0
            bridge_best = 0.0
            bridge_worst = 0.0
            local_seen = False
            bridge_seen = False
            acc = 0.0
            count = 0
            for m in range(starts[a], ends[a]):
                for n in range(starts[b], ends[b]):
                    d = n - m
                    if -window <= d <= window:
                        v = float(band[m, d + window])
                        if not local_seen or v > local_best:
                            local_best = v
                        if not local_seen or v < local_worst:
                            local_worst = v
                        local_seen = True
                        acc += v
                        count += 1
                    elif n_overlay > 0:
                        key = m * n_tokens + n
                        lo = 0
                        hi = n_overlay
                        while lo < hi:
                            mid = (lo + hi) // 2
                            if overlay_keys[mid] < key:
                                lo = mid + 1
                            else:
                                hi = mid
                        if lo < n_overlay and overlay_keys[lo] == key:
                            v = overlay_vals[lo]
                            if not bridge_seen or v > bridge_best:
                                bridge_best = v
                            if not bridge_seen or v < bridge_worst:
                                bridge_worst = v
                            bridge_seen = True
                            acc += v
                            count += 1
            if count == 0:
                continue
            present[a, b] = 1
            if mode == POOL_MAX:
                if bridge_seen and (not local_seen or bridge_best > local_best):
                    weights[a, b] = bridge_best
                    bridged[a, b] = 1
                else:
                    weights[a, b] = local_best
            elif mode == POOL_MIN:
                if bridge_seen and (not local_seen or bridge_worst < local_worst):
                    weights[a, b] = bridge_worst
                    bridged[a, b] = 1
                else:
                    weights[a, b] = local_worst
            else:
                weights[a, b] = acc / count
                if bridge_seen:
                    bridged[a, b] = 1
    return weights, present, bridged


pool_pairs_py = _pool_pairs
USING_NUMBA = False

if os.environ.get("SPANWALK_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from numba import njit

        pool_pairs = njit(cache=True)(_pool_pairs)
        USING_NUMBA = True
    except ImportError:
        pool_pairs = _pool_pairs
else:
    pool_pairs = _pool_pairs
