"""Nonlinear least squares: Levenberg-Marquardt plus four parametric models.

Model families
--------------
exponential  y = a * (1 - exp(-b x)) + c
logistic     y = a / (1 + exp(-b (x - c)))
power_law    y = a * x**b + c          (requires x > 0)
four_pl      y = d + (a - d) / (1 + (x/c)**b)   (requires x > 0, c > 0)

The fitter uses a numeric central-difference Jacobian for all models (one
code path; analytic partials live only in the test suite as oracles) and
soft-bounds four_pl's c > 0 through a log transform of that parameter.
Non-convergence is reported, not raised: the best parameters found are
returned with ``converged=False`` so downstream feature extraction can keep
the value and carry a quality flag.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import FitConfig

_EXP_CLIP = 700.0


class ModelKind(Enum):
    EXPONENTIAL = "exponential"
    LOGISTIC = "logistic"
    POWER_LAW = "power_law"
    FOUR_PL = "four_pl"


PARAM_NAMES: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.EXPONENTIAL: ("a", "b", "c"),
    ModelKind.LOGISTIC: ("a", "b", "c"),
    ModelKind.POWER_LAW: ("a", "b", "c"),
    ModelKind.FOUR_PL: ("a", "b", "c", "d"),
}


class FitDomainError(ValueError):
    """Input x (or a parameter) violates the model's domain."""


@dataclass
class FitResult:
    kind: ModelKind
    params: np.ndarray
    r_squared: float
    residual_norm: float
    iterations: int
    converged: bool
    flags: set[str] = field(default_factory=set)
    cost_trace: list[float] | None = None

    @property
    def named_params(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(PARAM_NAMES[self.kind], self.params)}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "params": self.named_params,
            "r_squared": self.r_squared,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "flags": sorted(self.flags),
        }


def _check_domain(kind: ModelKind, x: np.ndarray) -> None:
    if kind in (ModelKind.POWER_LAW, ModelKind.FOUR_PL) and np.any(x <= 0.0):
        raise FitDomainError(f"{kind.value} requires x > 0")


def eval_model(kind: ModelKind, params, x) -> np.ndarray:
    """Pointwise model evaluation; exponents are clipped so output is finite."""
    p = np.asarray(params, dtype=np.float64)
    xv = np.asarray(x, dtype=np.float64)
    expect = len(PARAM_NAMES[kind])
    if p.size != expect:
        raise ValueError(f"{kind.value} takes {expect} parameters, got {p.size}")
    _check_domain(kind, xv)
    if kind is ModelKind.EXPONENTIAL:
        a, b, c = p
        return a * (1.0 - np.exp(np.clip(-b * xv, -_EXP_CLIP, _EXP_CLIP))) + c
    if kind is ModelKind.LOGISTIC:
        a, b, c = p
        return a / (1.0 + np.exp(np.clip(-b * (xv - c), -_EXP_CLIP, _EXP_CLIP)))
    if kind is ModelKind.POWER_LAW:
        a, b, c = p
        return a * np.exp(np.clip(b * np.log(xv), -_EXP_CLIP, _EXP_CLIP)) + c
    a, b, c, d = p
    if c <= 0.0:
        raise FitDomainError("four_pl requires c > 0")
    ratio = np.exp(np.clip(b * np.log(xv / c), -_EXP_CLIP, _EXP_CLIP))
    return d + (a - d) / (1.0 + ratio)


def _edge_mean(y: np.ndarray, head: bool) -> float:
    k = max(1, y.size // 10)
    return float(np.mean(y[:k] if head else y[-k:]))


def default_init(kind: ModelKind, x, y) -> np.ndarray:
    """Heuristic starting parameters for ``fit``."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    n_params = len(PARAM_NAMES[kind])
    if xv.size <= n_params:
        raise ValueError(
            f"need more than {n_params} points to initialize {kind.value}")
    _check_domain(kind, xv)
    rx = float(np.max(xv) - np.min(xv))
    ry = float(np.max(yv) - np.min(yv))
    if rx <= 0.0:
        raise ValueError("x has zero range")

    if kind is ModelKind.EXPONENTIAL:
        return np.array([ry, 1.0 / rx, yv[0]])

    if kind is ModelKind.LOGISTIC:
        head = _edge_mean(yv, True)
        tail = _edge_mean(yv, False)
        mid = 0.5 * (np.max(yv) + np.min(yv))
        c = float(xv[int(np.argmin(np.abs(yv - mid)))])
        # the end with larger |value| is the asymptote the curve reaches;
        # b's sign makes the transition run in the data's direction
        if abs(head) <= abs(tail):
            a = tail if tail != 0.0 else (ry if ry > 0 else 1.0)
            b = 4.0 / rx
        else:
            a = head if head != 0.0 else (ry if ry > 0 else 1.0)
            b = -4.0 / rx
        return np.array([a, b, c])

    if kind is ModelKind.POWER_LAW:
        if ry <= 0.0:
            return np.array([0.0, 1.0, yv[0]])
        pad = 0.05 * ry
        candidates = []
        for anchor, sign in ((float(np.min(yv)) - pad, 1.0),
                             (float(np.max(yv)) + pad, -1.0)):
            z = sign * (yv - anchor)
            slope, intercept = np.polyfit(np.log(xv), np.log(z), 1)
            cand = np.array([sign * np.exp(intercept), slope, anchor])
            sse = float(np.sum((eval_model(kind, cand, xv) - yv) ** 2))
            candidates.append((sse, cand))
        return min(candidates, key=lambda t: t[0])[1]

    # four_pl
    mid = 0.5 * (np.max(yv) + np.min(yv))
    c = float(xv[int(np.argmin(np.abs(yv - mid)))])
    if c <= 0.0:
        c = float(np.median(xv))
    return np.array([yv[0], 2.0, c, yv[-1]])


def numeric_jacobian(func, params, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued function of params."""
    p = np.asarray(params, dtype=np.float64)
    cols = []
    for j in range(p.size):
        h = step * max(abs(p[j]), 1.0)
        plus = p.copy()
        plus[j] += h
        minus = p.copy()
        minus[j] -= h
        cols.append((func(plus) - func(minus)) / (2.0 * h))
    return np.column_stack(cols)


def r_squared(y, yhat) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot.

    A constant target makes SS_tot zero; that case warns and returns 0.
    """
    yv = np.asarray(y, dtype=np.float64)
    hv = np.asarray(yhat, dtype=np.float64)
    if yv.size != hv.size or yv.size < 2:
        raise ValueError("y and yhat must be equal length >= 2")
    ss_tot = float(np.sum((yv - np.mean(yv)) ** 2))
    if ss_tot == 0.0:
        warnings.warn("r_squared undefined for constant y; reporting 0",
                      stacklevel=2)
        return 0.0
    ss_res = float(np.sum((yv - hv) ** 2))
    return 1.0 - ss_res / ss_tot


def fit(kind: ModelKind, x, y, init=None, fixed: dict[str, float] | None = None,
        config: FitConfig = FitConfig(), trace: bool = False) -> FitResult:
    """Levenberg-Marquardt least-squares fit of one model family.

    Parameters
    ----------
    init : optional starting vector (full length, natural space); defaults
        to ``default_init``.
    fixed : optional {param_name: value} pinning a subset of parameters
        (e.g. the pressing-phase fit pins c = 0); pinned parameters are
        excluded from the optimization.
    trace : record the accepted-step cost sequence in ``cost_trace``.

    Returns the best parameters found even when not converged (flagged).
    """
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    names = PARAM_NAMES[kind]
    if xv.size != yv.size:
        raise ValueError("x and y must have equal length")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise ValueError("fit requires finite x and y")
    _check_domain(kind, xv)

    fixed = dict(fixed or {})
    for name in fixed:
        if name not in names:
            raise ValueError(f"unknown parameter {name!r} for {kind.value}")
    free_idx = [i for i, n in enumerate(names) if n not in fixed]
    if xv.size < len(free_idx) + 1:
        raise ValueError(
            f"need at least {len(free_idx) + 1} points for {len(free_idx)} "
            "free parameters")

    flags: set[str] = set()
    if init is None:
        full = default_init(kind, xv, yv)
    else:
        full = np.asarray(init, dtype=np.float64).copy()
        if full.size != len(names):
            raise ValueError("init length does not match parameter count")
    for name, value in fixed.items():
        full[names.index(name)] = value

    # four_pl's c is optimized in log space to keep it positive
    log_c = kind is ModelKind.FOUR_PL and "c" not in fixed
    c_pos = names.index("c") if kind is ModelKind.FOUR_PL else -1
    if kind is ModelKind.FOUR_PL and full[c_pos] <= 0.0:
        raise FitDomainError("four_pl requires c > 0")

    def to_theta(p):
        t = p[free_idx].copy()
        if log_c:
            t[free_idx.index(c_pos)] = np.log(p[c_pos])
        return t

    def to_params(t):
        p = full.copy()
        p[free_idx] = t
        if log_c:
            p[c_pos] = np.exp(t[free_idx.index(c_pos)])
        return p

    def residual(t):
        return yv - eval_model(kind, to_params(t), xv)

    theta = to_theta(full)
    r = residual(theta)
    cost = float(r @ r)
    best_theta = theta.copy()
    best_cost = cost
    lam = config.lambda_init
    converged = False
    iterations = 0
    trace_list: list[float] | None = [cost] if trace else None

    while iterations < config.max_iterations:
        iterations += 1
        J = numeric_jacobian(residual, theta, config.jacobian_step)
        A = J.T @ J
        g = J.T @ r
        diag = np.maximum(np.diag(A), 1e-12)
        try:
            step = np.linalg.solve(A + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= config.lambda_up
            if lam > config.lambda_max:
                break
            continue
        cand = theta + step
        r_cand = residual(cand)
        cost_cand = float(r_cand @ r_cand)
        if cost_cand <= cost and np.isfinite(cost_cand):
            rel_drop = (cost - cost_cand) / max(cost, 1e-300)
            theta = cand
            r = r_cand
            cost = cost_cand
            if trace_list is not None:
                trace_list.append(cost)
            if cost < best_cost:
                best_cost = cost
                best_theta = theta.copy()
            lam = max(lam / config.lambda_down, 1e-14)
            if rel_drop < config.cost_tol or float(np.linalg.norm(step)) < config.step_tol:
                converged = True
                break
        else:
            lam *= config.lambda_up
            if lam > config.lambda_max:
                break

    if not converged:
        flags.add("not_converged")
    params = to_params(best_theta)
    yhat = eval_model(kind, params, xv)
    ss_tot = float(np.sum((yv - np.mean(yv)) ** 2))
    if ss_tot == 0.0:
        r2 = 0.0
        flags.add("r_squared_undefined")
    else:
        r2 = 1.0 - float(np.sum((yv - yhat) ** 2)) / ss_tot
    return FitResult(
        kind=kind,
        params=params,
        r_squared=r2,
        residual_norm=float(np.sqrt(best_cost)),
        iterations=iterations,
        converged=converged,
        flags=flags,
        cost_trace=trace_list,
    )
