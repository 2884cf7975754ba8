"""Statistical analyses: PCA, classical MDS, Spearman matrix, null baseline,
top-k importance curve, and feature-group ablation.

Everything here is deterministic given its seed; analyses that retrain
models (topk_curve, ablation) delegate to the harness protocol and import it
lazily to keep the module layering acyclic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .models import Dataset, ImportanceRanking
from .registry import FEATURE_GROUPS, group_mask


@dataclass(frozen=True)
class PCAResult:
    components: np.ndarray                # (k, p), orthonormal rows
    explained_variance_ratio: np.ndarray  # (k,)
    scores: np.ndarray                    # (n, k)
    mean: np.ndarray                      # (p,)
    scale: np.ndarray                     # (p,) divisors (ones if unstandardized)
    standardized: bool


@dataclass(frozen=True)
class MDSResult:
    coords: np.ndarray                    # (m, k)
    eigenvalues: np.ndarray               # descending, full spectrum


def _fix_signs(components: np.ndarray, scores: np.ndarray | None = None):
    """Deterministic orientation: each component's largest-|.| entry positive."""
    for i in range(components.shape[0]):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
            if scores is not None:
                scores[:, i] = -scores[:, i]


def pca(X, k: int, standardize: bool = True) -> PCAResult:
    """Eigendecomposition of the covariance (or correlation) matrix."""
    arr = np.asarray(X, dtype=np.float64)
    n, p = arr.shape
    if n < 2:
        raise ValueError("pca needs at least 2 samples")
    if not 1 <= k <= min(n, p):
        raise ValueError(f"k must be in [1, min(n, p)] = [1, {min(n, p)}]")
    if not np.all(np.isfinite(arr)):
        raise ValueError("pca requires finite input")
    mean = arr.mean(axis=0)
    centered = arr - mean
    if standardize:
        scale = centered.std(axis=0)
        scale = np.where(scale == 0.0, 1.0, scale)
    else:
        scale = np.ones(p)
    centered = centered / scale
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T[:k].copy()
    total = float(eigvals.sum())
    ratios = eigvals[:k] / total if total > 0 else np.zeros(k)
    scores = centered @ components.T
    _fix_signs(components, scores)
    return PCAResult(components=components,
                     explained_variance_ratio=ratios,
                     scores=scores, mean=mean, scale=scale,
                     standardized=standardize)


def classical_mds(dist, k: int = 2) -> MDSResult:
    """Torgerson MDS: double-center the squared distances, embed top-k."""
    D = np.asarray(dist, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if np.any(D < 0):
        raise ValueError("distances must be nonnegative")
    if not np.allclose(D, D.T, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.abs(np.diag(D)) > 1e-12):
        raise ValueError("distance matrix must have a zero diagonal")
    m = D.shape[0]
    J = np.eye(m) - np.ones((m, m)) / m
    B = -0.5 * J @ (D ** 2) @ J
    eigvals, eigvecs = np.linalg.eigh(B)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    lam = np.clip(eigvals[:k], 0.0, None)
    # numerically-zero eigenvalues carry arbitrary null-space vectors;
    # their axes have no variance and are pinned to exactly zero
    lam[lam <= max(float(eigvals[0]), 0.0) * 1e-12] = 0.0
    coords = eigvecs[:, :k] * np.sqrt(lam)
    _fix_signs(coords.T)
    return MDSResult(coords=coords, eigenvalues=eigvals)


def participant_distance(vectors: dict[str, np.ndarray]) -> tuple[tuple[str, ...], np.ndarray]:
    """Pairwise Euclidean distances between participants' rating vectors."""
    if not vectors:
        raise ValueError("no participant vectors")
    ids = tuple(sorted(vectors))
    first = np.asarray(vectors[ids[0]], dtype=np.float64)
    stack = np.empty((len(ids), first.size))
    for i, pid in enumerate(ids):
        v = np.asarray(vectors[pid], dtype=np.float64)
        if v.shape != first.shape:
            raise ValueError(f"participant {pid} vector length mismatch")
        stack[i] = v
    diff = stack[:, None, :] - stack[None, :, :]
    return ids, np.sqrt(np.sum(diff ** 2, axis=2))


def _midranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_matrix(columns) -> np.ndarray:
    """Pairwise Spearman rho via Pearson on mid-ranks (ties averaged).

    Accepts an (n, m) matrix; returns (m, m) with unit diagonal. A constant
    column makes rho undefined: those entries are flagged 0 with a warning.
    """
    arr = np.asarray(columns, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise ValueError("need an (n, m) matrix with n >= 3")
    m = arr.shape[1]
    ranks = np.column_stack([_midranks(arr[:, j]) for j in range(m)])
    centered = ranks - ranks.mean(axis=0)
    norms = np.sqrt(np.sum(centered ** 2, axis=0))
    out = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            if norms[i] == 0.0 or norms[j] == 0.0:
                warnings.warn(f"spearman undefined for constant column "
                              f"({i}, {j}); reporting 0", stacklevel=2)
                rho = 0.0
            else:
                rho = float(centered[:, i] @ centered[:, j] / (norms[i] * norms[j]))
            out[i, j] = out[j, i] = rho
    return out


def null_model(n: int, seed: int = 0) -> np.ndarray:
    """The chance-floor regressor: i.i.d. uniform(0, 1) predictions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.random.default_rng(seed).uniform(0.0, 1.0, n)


def topk_curve(dataset: Dataset, importance: ImportanceRanking, ks,
               protocol, kind: str = "rf_classifier", config=None) -> dict[int, float]:
    """Mean accuracy as a function of the number of top-ranked features.

    The top-k subset keeps the dataset's original column order, so k = p
    reproduces the full-feature evaluation exactly under the same seeds.
    """
    from .harness import evaluate_dataset
    ks = list(ks)
    if not ks:
        raise ValueError("ks must be nonempty")
    p = dataset.X.shape[1]
    if any(k < 1 or k > p for k in ks):
        raise ValueError(f"every k must be in [1, {p}]")
    out: dict[int, float] = {}
    for k in ks:
        sub = dataset.subset(features=importance.top(k))
        report = evaluate_dataset(sub, protocol, kind, config=config)
        out[k] = report.aggregate["accuracy"]["mean"]
    return out


def ablation(groups, dataset: Dataset, protocol, kind: str | None = None,
             config=None) -> dict[str, "object"]:
    """One full protocol evaluation per feature group plus 'all'."""
    from .harness import evaluate_dataset
    out = {}
    for group in groups:
        if group != "all" and group not in FEATURE_GROUPS:
            raise ValueError(f"unknown feature group {group!r}")
        sub = dataset.subset(features=group_mask(group))
        chosen = kind or ("rf_classifier" if dataset.task == "classification"
                          else "rf_regressor")
        report = evaluate_dataset(sub, protocol, chosen, config=config,
                                  group=group)
        out[group] = report
    return out
