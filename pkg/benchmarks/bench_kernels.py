#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

The package dispatches on `taction._kernels.USING_NUMBA` (set
TACTION_DISABLE_NUMBA=1 to force the fallback package-wide); this script
times both implementations side by side regardless of the dispatch, median
wall time per call.
"""

import time

import numpy as np

from taction._kernels import (USING_NUMBA, _apply_tree_numpy,
                              _py_apply_tree, _py_sliding_mad,
                              _py_split_gini, _py_split_sse,
                              _sliding_mad_numpy, _split_gini_numpy,
                              _split_sse_numpy, _tree_build_loop)
from taction.models.forest import _build_tree_numpy

try:
    from numba import njit
    import taction._kernels as _K
    if USING_NUMBA:
        JITTED = {
            "split_gini": _K.find_best_split_gini,
            "split_sse": _K.find_best_split_sse,
            "apply_tree": _K.apply_tree,
            "sliding_mad": _K.sliding_mad,
            "tree_build": _K.build_tree,
        }
    else:
        JITTED = {
            "split_gini": njit(cache=True)(_py_split_gini),
            "split_sse": njit(cache=True)(_py_split_sse),
            "apply_tree": njit(cache=True)(_py_apply_tree),
            "sliding_mad": njit(cache=True)(_py_sliding_mad),
            "tree_build": njit(cache=True)(_tree_build_loop),
        }
except ImportError:
    JITTED = {}

NUMPY = {
    "split_gini": _split_gini_numpy,
    "split_sse": _split_sse_numpy,
    "apply_tree": _apply_tree_numpy,
    "sliding_mad": _sliding_mad_numpy,
    "tree_build": _build_tree_numpy,
}


def median_time(fn, args_fn, repeats=30, warmup=3):
    for _ in range(warmup):
        fn(*args_fn())
    times = []
    for _ in range(repeats):
        args = args_fn()
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main():
    rng = np.random.default_rng(42)
    n, p = 400, 98
    X = rng.normal(size=(n, p))
    idx = np.arange(n, dtype=np.int64)
    feats = np.sort(rng.choice(p, size=10, replace=False)).astype(np.int64)
    y_cls = rng.integers(0, 10, size=n).astype(np.int64)
    y_reg = rng.normal(size=n)

    depth = 12
    n_nodes = 2 ** depth - 1
    feature = rng.integers(0, p, size=n_nodes).astype(np.int64)
    feature[n_nodes // 2:] = -1
    threshold = rng.normal(size=n_nodes)
    left = np.arange(1, n_nodes + 1, dtype=np.int64).clip(max=n_nodes - 1)
    right = np.arange(2, n_nodes + 2, dtype=np.int64).clip(max=n_nodes - 1)
    Xq = rng.normal(size=(2000, p))

    sig = rng.normal(size=20_000)

    cases = {
        "split_gini": lambda: (X, idx, feats, y_cls, 10),
        "split_sse": lambda: (X, idx, feats, y_reg),
        "apply_tree": lambda: (Xq, feature, threshold, left, right),
        "sliding_mad": lambda: (sig, 25),
        # full-depth classification tree on shuffled labels: the RF hot path
        "tree_build": lambda: (X, np.zeros(1), y_cls, True, 10, 7,
                               10, 1, 0, np.zeros(p)),
    }

    print(f"numba available: {bool(JITTED)}; package dispatch USING_NUMBA="
          f"{USING_NUMBA}")
    print(f"{'kernel':<14}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>10}")
    for name, args_fn in cases.items():
        t_np = median_time(NUMPY[name], args_fn)
        if JITTED:
            t_nb = median_time(JITTED[name], args_fn)
            print(f"{name:<14}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}"
                  f"{t_np / t_nb:>10.1f}x")
        else:
            print(f"{name:<14}{t_np * 1e3:>12.3f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
