"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``TACTION_DISABLE_NUMBA`` is unset (or "0"). Both paths are written
so that every floating-point operation happens in the same order, which
keeps the two implementations bit-identical (ties in sorts are resolved with
mergesort on both sides for the same reason). ``benchmarks/bench_kernels.py``
compares their speed.
"""

import os

import numpy as np

DISABLE_ENV = "TACTION_DISABLE_NUMBA"


def _numba_enabled() -> bool:
    if os.environ.get(DISABLE_ENV, "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_enabled()

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def mix_seed(seed: int, index: int) -> int:
    """Derive a child seed from (seed, index) via one splitmix64 round.

    Pure-int arithmetic, platform independent. Used for per-tree, per-repeat
    and per-trial seed derivation so parallel and serial schedules agree.
    """
    z = ((int(seed) << 32) ^ (int(index) & 0xFFFFFFFF)) & _MASK64
    z = (z + _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return z & 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Best-split search for CART trees.
#
# Both kernels maximize a criterion that is monotone in the impurity
# decrease and is computed from exact integer counts (classification) or
# sequentially accumulated sums (regression), so the numba loop and the
# numpy cumsum fallback give identical bits. Returned tuple:
# (feature, threshold, decrease_scaled, n_left), feature == -1 when no
# valid boundary exists. decrease_scaled is n_node * impurity decrease.
# ---------------------------------------------------------------------------


def _split_gini_loop(X, idx, feats, y, n_classes):
    n = idx.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_crit = -1.0
    best_nl = 0

    total = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        total[y[idx[i]]] += 1
    s_tot = 0
    for c in range(n_classes):
        s_tot += total[c] * total[c]
    parent = s_tot / n

    v = np.empty(n, dtype=np.float64)
    left = np.empty(n_classes, dtype=np.int64)
    for fj in range(feats.shape[0]):
        f = feats[fj]
        for i in range(n):
            v[i] = X[idx[i], f]
        order = np.argsort(v, kind="mergesort")
        for c in range(n_classes):
            left[c] = 0
        s_l = 0
        for i in range(n - 1):
            c = y[idx[order[i]]]
            # incremental update of sum of squared left counts
            s_l += 2 * left[c] + 1
            left[c] += 1
            lo = v[order[i]]
            hi = v[order[i + 1]]
            if lo == hi:
                continue
            n_l = i + 1
            n_r = n - n_l
            s_r = 0
            for cc in range(n_classes):
                d = total[cc] - left[cc]
                s_r += d * d
            crit = s_l / n_l + s_r / n_r
            if crit > best_crit:
                thr = 0.5 * (lo + hi)
                if thr >= hi:
                    thr = lo
                best_crit = crit
                best_feat = f
                best_thr = thr
                best_nl = n_l
    if best_feat < 0:
        return -1, 0.0, 0.0, 0
    return best_feat, best_thr, best_crit - parent, best_nl


def _split_gini_numpy(X, idx, feats, y, n_classes):
    n = idx.shape[0]
    y_node = y[idx]
    total = np.bincount(y_node, minlength=n_classes).astype(np.int64)
    parent = float(np.sum(total * total)) / n

    best_feat = -1
    best_thr = 0.0
    best_crit = -1.0
    best_nl = 0
    n_l = np.arange(1, n, dtype=np.int64)
    n_r = n - n_l
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="mergesort")
        vs = v[order]
        boundary = vs[:-1] != vs[1:]
        if not boundary.any():
            continue
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), y_node[order]] = 1
        cum = np.cumsum(onehot, axis=0)[:-1]
        s_l = np.sum(cum * cum, axis=1)
        rest = total[None, :] - cum
        s_r = np.sum(rest * rest, axis=1)
        crit = s_l / n_l + s_r / n_r
        crit[~boundary] = -np.inf
        i = int(np.argmax(crit))
        c = crit[i]
        if c > best_crit:
            lo = vs[i]
            hi = vs[i + 1]
            thr = 0.5 * (lo + hi)
            if thr >= hi:
                thr = lo
            best_crit = float(c)
            best_feat = int(f)
            best_thr = float(thr)
            best_nl = i + 1
    if best_feat < 0:
        return -1, 0.0, 0.0, 0
    return best_feat, best_thr, best_crit - parent, best_nl


def _split_sse_loop(X, idx, feats, y):
    n = idx.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_crit = -np.inf
    best_nl = 0

    yv = np.empty(n, dtype=np.float64)
    v = np.empty(n, dtype=np.float64)
    for i in range(n):
        yv[i] = y[idx[i]]

    for fj in range(feats.shape[0]):
        f = feats[fj]
        for i in range(n):
            v[i] = X[idx[i], f]
        order = np.argsort(v, kind="mergesort")
        total = 0.0
        for i in range(n):
            total += yv[order[i]]
        run = 0.0
        for i in range(n - 1):
            run += yv[order[i]]
            lo = v[order[i]]
            hi = v[order[i + 1]]
            if lo == hi:
                continue
            n_l = i + 1
            n_r = n - n_l
            rs = total - run
            crit = run * run / n_l + rs * rs / n_r
            if crit > best_crit:
                thr = 0.5 * (lo + hi)
                if thr >= hi:
                    thr = lo
                best_crit = crit
                best_feat = f
                best_thr = thr
                best_nl = n_l
    if best_feat < 0:
        return -1, 0.0, 0.0, 0
    # decrease = SSE_parent - SSE_children = crit - total^2/n, recompute total
    total = 0.0
    for i in range(n):
        total += yv[i]
    return best_feat, best_thr, best_crit - total * total / n, best_nl


def _split_sse_numpy(X, idx, feats, y):
    n = idx.shape[0]
    yv = y[idx].astype(np.float64)

    best_feat = -1
    best_thr = 0.0
    best_crit = -np.inf
    best_nl = 0
    n_l = np.arange(1, n, dtype=np.float64)
    n_r = n - n_l
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="mergesort")
        vs = v[order]
        boundary = vs[:-1] != vs[1:]
        if not boundary.any():
            continue
        cs = np.cumsum(yv[order])
        total = cs[-1]
        run = cs[:-1]
        rs = total - run
        crit = run * run / n_l + rs * rs / n_r
        crit[~boundary] = -np.inf
        i = int(np.argmax(crit))
        c = crit[i]
        if c > best_crit:
            lo = vs[i]
            hi = vs[i + 1]
            thr = 0.5 * (lo + hi)
            if thr >= hi:
                thr = lo
            best_crit = float(c)
            best_feat = int(f)
            best_thr = float(thr)
            best_nl = i + 1
    if best_feat < 0:
        return -1, 0.0, 0.0, 0
    # cumsum is sequential, matching the loop kernel's accumulation order
    total = float(np.cumsum(yv)[-1])
    return best_feat, best_thr, best_crit - total * total / n, best_nl


# ---------------------------------------------------------------------------
# Tree traversal: map query rows to leaf node indices.
# ---------------------------------------------------------------------------


def _apply_tree_loop(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _apply_tree_numpy(X, feature, threshold, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active = feature[node] >= 0
    return node


# ---------------------------------------------------------------------------
# Sliding median absolute deviation (centered window, shrinking edges).
# ---------------------------------------------------------------------------


def _sliding_mad_loop(x, k):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    half_lo = (k - 1) // 2
    half_hi = k // 2
    for i in range(n):
        a = i - half_lo
        if a < 0:
            a = 0
        b = i + half_hi + 1
        if b > n:
            b = n
        w = x[a:b]
        m = np.median(w)
        out[i] = np.median(np.abs(w - m))
    return out


def _sliding_mad_numpy(x, k):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    half_lo = (k - 1) // 2
    half_hi = k // 2
    lo = max(half_lo, 0)
    hi = n - half_hi - 1
    if hi >= lo and k <= n:
        win = np.lib.stride_tricks.sliding_window_view(x, k)
        med = np.median(win, axis=1)
        out[lo : hi + 1] = np.median(np.abs(win - med[:, None]), axis=1)
    for i in range(min(lo, n)):
        w = x[max(i - half_lo, 0) : min(i + half_hi + 1, n)]
        m = np.median(w)
        out[i] = np.median(np.abs(w - m))
    for i in range(max(hi + 1, 0), n):
        w = x[max(i - half_lo, 0) : min(i + half_hi + 1, n)]
        m = np.median(w)
        out[i] = np.median(np.abs(w - m))
    return out


# ---------------------------------------------------------------------------
# Whole-tree CART builder.
#
# The loop version is the numba fast path; the pure-numpy fallback lives in
# taction.models.forest and replays the identical algorithm (same counter-
# based splitmix64 stream, same mergesort tie order, same arithmetic), so the
# two construct identical trees. Children inherit the best feature's sorted
# sample order. Returns (feature, threshold, left, right, value_cls,
# value_reg, n_nodes); the caller accumulates `importance` in place.
# ---------------------------------------------------------------------------

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix_at(seed, counter):
    """counter-th value (1-based) of the splitmix64 stream for `seed`."""
    z = np.uint64(seed) + np.uint64(counter) * _SM_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _SM_M1
    z = (z ^ (z >> np.uint64(27))) * _SM_M2
    return z ^ (z >> np.uint64(31))


def _tree_build_loop(X, y_reg, y_cls, classification, n_classes, seed,
                     mtry, min_leaf, max_depth, importance):
    n = X.shape[0]
    p = X.shape[1]
    cap = 2 * n + 1

    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value_cls = np.zeros((cap, n_classes if n_classes > 0 else 1))
    value_reg = np.zeros(cap)

    counter = np.uint64(0)
    samples = np.empty(n, dtype=np.int64)
    for i in range(n):
        counter += np.uint64(1)
        samples[i] = np.int64(_splitmix_at(seed, counter) % np.uint64(n))

    pool = np.empty(p, dtype=np.int64)
    feats = np.empty(mtry, dtype=np.int64)

    # explicit stack: (start, end, depth, node)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    top = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    st_node[0] = 0
    n_nodes = 1

    while top >= 0:
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        node = st_node[top]
        top -= 1
        n_node = end - start
        idx = samples[start:end]

        if classification:
            first = y_cls[idx[0]]
            pure = True
            for i in range(1, n_node):
                if y_cls[idx[i]] != first:
                    pure = False
                    break
        else:
            lo = y_reg[idx[0]]
            hi = lo
            for i in range(1, n_node):
                v = y_reg[idx[i]]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            pure = hi == lo

        capped = max_depth > 0 and depth >= max_depth
        if n_node < 2 or n_node < 2 * min_leaf or pure or capped:
            if classification:
                for i in range(n_node):
                    value_cls[node, y_cls[idx[i]]] += 1.0
                for c in range(n_classes):
                    value_cls[node, c] /= n_node
            else:
                s = 0.0
                for i in range(n_node):
                    s += y_reg[idx[i]]
                value_reg[node] = s / n_node
            continue

        for j in range(p):
            pool[j] = j
        for j in range(mtry):
            counter += np.uint64(1)
            r = _splitmix_at(seed, counter)
            k = j + np.int64(r % np.uint64(p - j))
            tmp = pool[j]
            pool[j] = pool[k]
            pool[k] = tmp
        feats[:] = np.sort(pool[:mtry])

        if classification:
            f, thr, decrease, n_left = _split_gini_loop(
                X, idx, feats, y_cls, n_classes)
        else:
            f, thr, decrease, n_left = _split_sse_loop(X, idx, feats, y_reg)

        if f < 0 or decrease <= 0.0 or n_left < min_leaf \
                or n_node - n_left < min_leaf:
            if classification:
                for i in range(n_node):
                    value_cls[node, y_cls[idx[i]]] += 1.0
                for c in range(n_classes):
                    value_cls[node, c] /= n_node
            else:
                s = 0.0
                for i in range(n_node):
                    s += y_reg[idx[i]]
                value_reg[node] = s / n_node
            continue

        importance[f] += decrease / n

        v = np.empty(n_node, dtype=np.float64)
        for i in range(n_node):
            v[i] = X[idx[i], f]
        order = np.argsort(v, kind="mergesort")
        reordered = np.empty(n_node, dtype=np.int64)
        for i in range(n_node):
            reordered[i] = idx[order[i]]
        samples[start:end] = reordered

        l_node = n_nodes
        r_node = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = thr
        left[node] = l_node
        right[node] = r_node
        # push right first so the left child builds (and draws) first
        top += 1
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        st_node[top] = r_node
        top += 1
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        st_node[top] = l_node

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], value_cls[:n_nodes], value_reg[:n_nodes])


# interpreted originals, preserved for the benchmark and the fallback path
_py_split_gini = _split_gini_loop
_py_split_sse = _split_sse_loop
_py_apply_tree = _apply_tree_loop
_py_sliding_mad = _sliding_mad_loop

if USING_NUMBA:
    from numba import njit

    find_best_split_gini = njit(cache=True)(_py_split_gini)
    find_best_split_sse = njit(cache=True)(_py_split_sse)
    apply_tree = njit(cache=True)(_py_apply_tree)
    sliding_mad = njit(cache=True)(_py_sliding_mad)

    # rebind the globals the tree builder resolves, so its compilation
    # inlines the jitted kernels
    _split_gini_loop = find_best_split_gini
    _split_sse_loop = find_best_split_sse
    _splitmix_at = njit(cache=True)(_splitmix_at)
    build_tree = njit(cache=True)(_tree_build_loop)
else:
    find_best_split_gini = _split_gini_numpy
    find_best_split_sse = _split_sse_numpy
    apply_tree = _apply_tree_numpy
    sliding_mad = _sliding_mad_numpy
    build_tree = None          # forest uses the numpy fallback builder
