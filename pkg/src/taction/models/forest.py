"""Random forest of CART trees with deterministic, seed-derived randomness.

Classification trees split on Gini impurity, regression trees on variance
reduction. Per-tree seeds derive from hash(seed, tree_index) so serial and
parallel tree construction produce identical forests; bootstrap draws and
per-node feature subsets come from a counter-based splitmix64 stream.

Tree construction dispatches on the kernel backend: the numba path builds
the whole tree in one jitted call; the numpy fallback replays the identical
algorithm (same splitmix counter stream, same mergesort tie order, same
arithmetic), so both paths grow bit-identical forests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._kernels import (USING_NUMBA, _split_gini_numpy, _split_sse_numpy,
                        apply_tree, build_tree, mix_seed)

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix_block(seed: int, count: int, offset: int) -> np.ndarray:
    """Vectorized splitmix64 stream values [offset+1, offset+count]."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


@dataclass
class Tree:
    feature: np.ndarray      # int64, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray        # (n_nodes, n_classes) distributions or (n_nodes,) means

    def apply(self, X: np.ndarray) -> np.ndarray:
        return apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        return cls(feature=np.array(data["feature"], dtype=np.int64),
                   threshold=np.array(data["threshold"], dtype=np.float64),
                   left=np.array(data["left"], dtype=np.int64),
                   right=np.array(data["right"], dtype=np.int64),
                   value=np.array(data["value"], dtype=np.float64))


@dataclass
class Forest:
    trees: list[Tree]
    classification: bool
    n_classes: int
    n_features: int
    importance_raw: np.ndarray   # summed impurity decreases per feature

    def to_dict(self) -> dict:
        return {"classification": self.classification,
                "n_classes": self.n_classes,
                "n_features": self.n_features,
                "importance_raw": self.importance_raw.tolist(),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, data: dict) -> "Forest":
        return cls(trees=[Tree.from_dict(t) for t in data["trees"]],
                   classification=bool(data["classification"]),
                   n_classes=int(data["n_classes"]),
                   n_features=int(data["n_features"]),
                   importance_raw=np.array(data["importance_raw"],
                                           dtype=np.float64))


class _NodeRng:
    """Counter-based splitmix64 draws, replaying the jitted builder's stream."""

    def __init__(self, seed: int):
        self.seed = seed
        self.counter = 0

    def block(self, count: int) -> np.ndarray:
        out = _splitmix_block(self.seed, count, self.counter)
        self.counter += count
        return out

    def feature_subset(self, p: int, mtry: int) -> np.ndarray:
        draws = self.block(mtry)
        pool = np.arange(p, dtype=np.int64)
        for j in range(mtry):
            k = j + int(draws[j] % np.uint64(p - j))
            pool[j], pool[k] = pool[k], pool[j]
        subset = pool[:mtry]
        subset.sort()
        return subset


def _build_tree_numpy(X, y_reg, y_cls, classification, n_classes, seed,
                      mtry, min_leaf, max_depth, importance):
    """Pure-numpy replay of the jitted whole-tree builder."""
    n, p = X.shape
    rng = _NodeRng(seed)
    samples = (rng.block(n) % np.uint64(n)).astype(np.int64)

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    values: list = [None]

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        values.append(None)
        return len(feature) - 1

    work = [(0, n, 0, 0)]
    while work:
        start, end, depth, node = work.pop()
        idx = samples[start:end]
        n_node = end - start
        if classification:
            y_node = y_cls[idx]
            pure = bool((y_node == y_node[0]).all())
        else:
            y_node = y_reg[idx]
            pure = float(np.ptp(y_node)) == 0.0
        capped = max_depth > 0 and depth >= max_depth
        if n_node < 2 or n_node < 2 * min_leaf or pure or capped:
            if classification:
                counts = np.bincount(y_node, minlength=n_classes)
                values[node] = counts.astype(np.float64) / n_node
            else:
                values[node] = float(np.cumsum(y_node)[-1]) / n_node
            continue
        feats = rng.feature_subset(p, mtry)
        if classification:
            f, thr, decrease, n_left = _split_gini_numpy(
                X, idx, feats, y_cls, n_classes)
        else:
            f, thr, decrease, n_left = _split_sse_numpy(X, idx, feats, y_reg)
        if f < 0 or decrease <= 0.0 or n_left < min_leaf \
                or n_node - n_left < min_leaf:
            if classification:
                counts = np.bincount(y_node, minlength=n_classes)
                values[node] = counts.astype(np.float64) / n_node
            else:
                values[node] = float(np.cumsum(y_node)[-1]) / n_node
            continue
        importance[f] += decrease / n
        order = np.argsort(X[idx, f], kind="mergesort")
        samples[start:end] = idx[order]
        l_node = new_node()
        r_node = new_node()
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = l_node
        right[node] = r_node
        # push right first so the left child builds (and draws) first
        work.append((start + n_left, end, depth + 1, r_node))
        work.append((start, start + n_left, depth + 1, l_node))

    n_nodes = len(feature)
    if classification:
        value = np.zeros((n_nodes, n_classes))
        for i, v in enumerate(values):
            if v is not None:
                value[i] = v
    else:
        value = np.array([v if v is not None else 0.0 for v in values])
    return (np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            value)


def _grow_tree(X, y_reg, y_cls, classification, n_classes, seed, mtry,
               min_leaf, max_depth, importance) -> Tree:
    if USING_NUMBA:
        feat, thr, lt, rt, val_cls, val_reg = build_tree(
            X, y_reg, y_cls, classification, n_classes, seed, mtry,
            min_leaf, max_depth, importance)
        value = np.array(val_cls) if classification else np.array(val_reg)
        return Tree(feature=np.array(feat), threshold=np.array(thr),
                    left=np.array(lt), right=np.array(rt), value=value)
    feat, thr, lt, rt, value = _build_tree_numpy(
        X, y_reg, y_cls, classification, n_classes, seed, mtry,
        min_leaf, max_depth, importance)
    return Tree(feature=feat, threshold=thr, left=lt, right=rt, value=value)


def build_forest(X, y, seed: int, n_trees: int, classification: bool,
                 n_classes: int = 0, min_leaf: int = 1,
                 max_depth: int = 0) -> Forest:
    """Fit a forest. mtry is sqrt(p) for classification, p/3 for regression."""
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    n, p = Xa.shape
    if classification:
        y_cls = np.ascontiguousarray(y, dtype=np.int64)
        y_reg = np.zeros(1)
        mtry = max(1, int(round(np.sqrt(p))))
    else:
        y_reg = np.ascontiguousarray(y, dtype=np.float64)
        y_cls = np.zeros(1, dtype=np.int64)
        mtry = max(1, p // 3)
    mtry = min(mtry, p)
    importance = np.zeros(p)
    trees = []
    for t in range(n_trees):
        trees.append(_grow_tree(Xa, y_reg, y_cls, classification, n_classes,
                                mix_seed(seed, t), mtry, min_leaf, max_depth,
                                importance))
    return Forest(trees=trees, classification=classification,
                  n_classes=n_classes, n_features=p,
                  importance_raw=importance)


def forest_predict_proba(forest: Forest, X) -> np.ndarray:
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros((Xa.shape[0], forest.n_classes))
    for tree in forest.trees:
        out += tree.value[tree.apply(Xa)]
    return out / len(forest.trees)


def forest_predict_mean(forest: Forest, X) -> np.ndarray:
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros(Xa.shape[0])
    for tree in forest.trees:
        out += tree.value[tree.apply(Xa)]
    return out / len(forest.trees)
