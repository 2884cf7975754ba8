"""k-nearest-neighbors, Gaussian naive Bayes, multinomial logistic regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


@dataclass
class KnnData:
    X: np.ndarray            # standardized training features
    y: np.ndarray            # int codes
    k: int

    def to_dict(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k}

    @classmethod
    def from_dict(cls, data: dict) -> "KnnData":
        return cls(X=np.array(data["X"], dtype=np.float64),
                   y=np.array(data["y"], dtype=np.int64), k=int(data["k"]))


def knn_fit(X: np.ndarray, y_codes: np.ndarray, k: int) -> KnnData:
    if X.shape[0] < k:
        raise ValueError(f"kNN needs at least k={k} training samples, "
                         f"got {X.shape[0]}")
    return KnnData(X=X, y=y_codes, k=k)


def knn_predict(model: KnnData, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Majority vote over the k nearest; ties go to the closest tied class."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        d = np.sum((model.X - X[i]) ** 2, axis=1)
        order = np.argsort(d, kind="mergesort")[:model.k]
        votes = np.bincount(model.y[order], minlength=n_classes)
        best = votes.max()
        tied = np.nonzero(votes == best)[0]
        if tied.size == 1:
            out[i] = tied[0]
        else:
            for j in order:                     # nearest first
                if votes[model.y[j]] == best:
                    out[i] = model.y[j]
                    break
    return out


@dataclass
class GnbParams:
    means: np.ndarray        # (C, p)
    variances: np.ndarray    # (C, p), floored
    log_priors: np.ndarray   # (C,)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(),
                "variances": self.variances.tolist(),
                "log_priors": self.log_priors.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GnbParams":
        return cls(means=np.array(data["means"], dtype=np.float64),
                   variances=np.array(data["variances"], dtype=np.float64),
                   log_priors=np.array(data["log_priors"], dtype=np.float64))


def gnb_fit(X: np.ndarray, y_codes: np.ndarray, n_classes: int,
            var_floor: float = 1e-9) -> GnbParams:
    p = X.shape[1]
    means = np.zeros((n_classes, p))
    variances = np.zeros((n_classes, p))
    log_priors = np.zeros(n_classes)
    n = X.shape[0]
    for c in range(n_classes):
        rows = X[y_codes == c]
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), var_floor)
        log_priors[c] = np.log(rows.shape[0] / n)
    return GnbParams(means=means, variances=variances, log_priors=log_priors)


def gnb_log_posterior(model: GnbParams, X: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior per class."""
    out = np.empty((X.shape[0], model.means.shape[0]))
    for c in range(model.means.shape[0]):
        var = model.variances[c]
        ll = -0.5 * (np.log(2.0 * np.pi * var)
                     + (X - model.means[c]) ** 2 / var).sum(axis=1)
        out[:, c] = model.log_priors[c] + ll
    return out


def gnb_predict_proba(model: GnbParams, X: np.ndarray) -> np.ndarray:
    log_post = gnb_log_posterior(model, X)
    log_post -= log_post.max(axis=1, keepdims=True)
    post = np.exp(log_post)
    return post / post.sum(axis=1, keepdims=True)


@dataclass
class LogisticParams:
    weights: np.ndarray      # (C, p)
    bias: np.ndarray         # (C,)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticParams":
        return cls(weights=np.array(data["weights"], dtype=np.float64),
                   bias=np.array(data["bias"], dtype=np.float64))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_fit(X: np.ndarray, y_codes: np.ndarray, n_classes: int,
                 l2: float = 1.0, grad_tol: float = 1e-6) -> LogisticParams:
    """Multinomial logistic regression, L2 on weights (not bias), L-BFGS."""
    n, p = X.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_codes] = 1.0

    def unpack(theta):
        W = theta[:n_classes * p].reshape(n_classes, p)
        b = theta[n_classes * p:]
        return W, b

    def objective(theta):
        W, b = unpack(theta)
        logits = X @ W.T + b
        logits -= logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(logits).sum(axis=1))
        nll = float((log_z - logits[np.arange(n), y_codes]).sum())
        nll += 0.5 * l2 * float((W * W).sum())
        probs = _softmax(logits)
        diff = probs - onehot
        grad_w = diff.T @ X + l2 * W
        grad_b = diff.sum(axis=0)
        return nll, np.concatenate([grad_w.ravel(), grad_b])

    theta0 = np.zeros(n_classes * p + n_classes)
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                   options={"gtol": grad_tol, "maxiter": 2000})
    W, b = unpack(res.x)
    return LogisticParams(weights=W, bias=b)


def logistic_predict_proba(model: LogisticParams, X: np.ndarray) -> np.ndarray:
    return _softmax(X @ model.weights.T + model.bias)
