"""Per-feature z-scoring with train-time statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray            # zero-variance features carry std 1 here
    constant: np.ndarray       # bool mask of flagged zero-variance features

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "constant": self.constant.astype(int).tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(mean=np.array(data["mean"], dtype=np.float64),
                   std=np.array(data["std"], dtype=np.float64),
                   constant=np.array(data["constant"], dtype=bool))


def standardize_fit(X) -> Standardizer:
    """Capture per-feature mean/std (population). Constant columns flagged."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError("standardize_fit needs an n x p matrix with n >= 2")
    if not np.all(np.isfinite(arr)):
        raise ValueError("standardize_fit requires finite input")
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return Standardizer(mean=mean, std=std, constant=constant)


def standardize_apply(standardizer: Standardizer, X) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != standardizer.mean.size:
        raise ValueError(f"expected {standardizer.mean.size} features, got "
                         f"{arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("standardize_apply requires finite input")
    return (arr - standardizer.mean) / standardizer.std
