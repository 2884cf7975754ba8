"""Curve-fit engine tests: analytic oracles, recovery, LM behavior."""

import numpy as np
import pytest

from taction.curvefit import (FitDomainError, ModelKind, default_init,
                              eval_model, fit, numeric_jacobian, r_squared)

# ---------------------------------------------------------------------------
# eval_model
# ---------------------------------------------------------------------------


def test_eval_exponential_at_zero():
    assert eval_model(ModelKind.EXPONENTIAL, [1.0, 1.0, 0.0], [0.0])[0] == 0.0


def test_eval_logistic_midpoint_is_half_a():
    for b in (0.5, 2.0, -3.0):
        y = eval_model(ModelKind.LOGISTIC, [2.0, b, 1.7], [1.7])[0]
        assert y == pytest.approx(1.0)


def test_eval_fourpl_approaches_d():
    y = eval_model(ModelKind.FOUR_PL, [30.0, 2.0, 1.0, 25.0], [1e6])[0]
    assert y == pytest.approx(25.0, abs=1e-6)


def test_eval_domain_violations():
    with pytest.raises(FitDomainError):
        eval_model(ModelKind.POWER_LAW, [1.0, 0.5, 0.0], [-1.0])
    with pytest.raises(FitDomainError):
        eval_model(ModelKind.FOUR_PL, [1.0, 2.0, -1.0, 0.0], [1.0])


# ---------------------------------------------------------------------------
# default_init
# ---------------------------------------------------------------------------


def test_init_exponential_within_factor_ten():
    true = (2.0, 0.8, -0.5)
    x = np.linspace(0.0, 6.0, 80)
    y = eval_model(ModelKind.EXPONENTIAL, true, x)
    init = default_init(ModelKind.EXPONENTIAL, x, y)
    for est, ref in zip(init, true):
        if abs(ref) > 1e-9:
            assert abs(est / ref) < 10.0 and abs(est / ref) > 0.1


def test_init_logistic_decreasing_gets_negative_b():
    x = np.linspace(0.0, 10.0, 60)
    y = eval_model(ModelKind.LOGISTIC, [2.0, -1.5, 5.0], x)   # 2 -> 0
    init = default_init(ModelKind.LOGISTIC, x, y)
    assert init[1] < 0.0


def test_init_underdetermined_rejected():
    with pytest.raises(ValueError):
        default_init(ModelKind.FOUR_PL, [1.0, 2.0], [3.0, 4.0])


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def test_fit_noiseless_exponential_recovery():
    x = np.linspace(0.0, 3.0, 100)
    y = eval_model(ModelKind.EXPONENTIAL, [2.0, 0.5, 0.0], x)
    res = fit(ModelKind.EXPONENTIAL, x, y)
    assert res.converged
    assert np.allclose(res.params, [2.0, 0.5, 0.0], rtol=1e-4, atol=1e-6)
    assert res.r_squared > 0.9999


def test_fit_one_percent_noise_r2():
    rng = np.random.default_rng(7)
    x = np.linspace(0.0, 3.0, 100)
    clean = eval_model(ModelKind.EXPONENTIAL, [2.0, 0.5, 0.0], x)
    y = clean + rng.normal(0.0, 0.01 * np.ptp(clean), x.size)
    res = fit(ModelKind.EXPONENTIAL, x, y)
    assert res.r_squared > 0.99


def test_fit_starting_at_optimum_converges_fast():
    x = np.linspace(0.0, 4.0, 50)
    params = np.array([1.5, 1.2, 0.3])
    y = eval_model(ModelKind.EXPONENTIAL, params, x)
    res = fit(ModelKind.EXPONENTIAL, x, y, init=params)
    assert res.converged
    assert res.iterations <= 2
    assert res.residual_norm == pytest.approx(0.0, abs=1e-9)


def test_fit_fixed_parameter_is_pinned():
    x = np.linspace(0.0, 3.0, 60)
    y = eval_model(ModelKind.EXPONENTIAL, [2.0, 1.0, 0.0], x)
    res = fit(ModelKind.EXPONENTIAL, x, y, fixed={"c": 0.0})
    assert res.params[2] == 0.0
    assert np.allclose(res.params[:2], [2.0, 1.0], rtol=1e-6)


def test_fit_order_invariance(rng):
    x = np.linspace(0.1, 8.0, 90)
    y = eval_model(ModelKind.LOGISTIC, [3.0, 1.5, 4.0], x) \
        + rng.normal(0, 0.01, 90)
    perm = rng.permutation(90)
    res_a = fit(ModelKind.LOGISTIC, x, y)
    res_b = fit(ModelKind.LOGISTIC, x[perm], y[perm])
    assert np.allclose(res_a.params, res_b.params, rtol=1e-9, atol=1e-12)


def test_fit_cost_nonincreasing():
    rng = np.random.default_rng(3)
    x = np.linspace(0.05, 10.0, 70)
    y = eval_model(ModelKind.POWER_LAW, [2.0, 0.7, 1.0], x) \
        + rng.normal(0, 0.02, 70)
    res = fit(ModelKind.POWER_LAW, x, y, trace=True)
    trace = np.array(res.cost_trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_fit_constant_target_flagged():
    x = np.linspace(0.0, 1.0, 30)
    res = fit(ModelKind.EXPONENTIAL, x, np.full(30, 2.0))
    assert res.r_squared == 0.0
    assert "r_squared_undefined" in res.flags


def test_fit_nonfinite_rejected():
    x = np.linspace(0.0, 1.0, 10)
    y = x.copy()
    y[3] = np.nan
    with pytest.raises(ValueError):
        fit(ModelKind.EXPONENTIAL, x, y)


def test_fit_fourpl_c_stays_positive():
    x = np.linspace(0.05, 20.0, 200)
    y = eval_model(ModelKind.FOUR_PL, [30.0, 1.3, 2.5, 25.0], x)
    res = fit(ModelKind.FOUR_PL, x, y)
    assert res.params[2] > 0.0
    assert np.allclose(res.params, [30.0, 1.3, 2.5, 25.0], rtol=1e-5)


# ---------------------------------------------------------------------------
# r_squared
# ---------------------------------------------------------------------------


def test_r_squared_perfect_and_mean():
    y = np.array([1.0, 2.0, 4.0, 8.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(4, y.mean())) == pytest.approx(0.0)


def test_r_squared_matches_bruteforce(rng):
    y = rng.normal(size=50)
    yhat = y + rng.normal(0, 0.5, 50)
    expected = 1 - np.sum((y - yhat) ** 2) / np.sum((y - np.mean(y)) ** 2)
    assert r_squared(y, yhat) == pytest.approx(expected, abs=1e-12)


def test_r_squared_constant_warns():
    with pytest.warns(UserWarning):
        assert r_squared(np.ones(5), np.zeros(5)) == 0.0


# ---------------------------------------------------------------------------
# numeric Jacobian vs analytic partials (analytic forms live only here)
# ---------------------------------------------------------------------------


def _analytic_jacobian(kind, params, x):
    x = np.asarray(x, dtype=np.float64)
    if kind is ModelKind.EXPONENTIAL:
        a, b, c = params
        e = np.exp(-b * x)
        return np.column_stack([1 - e, a * x * e, np.ones_like(x)])
    if kind is ModelKind.LOGISTIC:
        a, b, c = params
        s = 1.0 / (1.0 + np.exp(-b * (x - c)))
        return np.column_stack([s, a * s * (1 - s) * (x - c),
                                -a * s * (1 - s) * b])
    if kind is ModelKind.POWER_LAW:
        a, b, c = params
        xb = x ** b
        return np.column_stack([xb, a * xb * np.log(x), np.ones_like(x)])
    a, b, c, d = params
    r = (x / c) ** b
    denom = (1.0 + r) ** 2
    return np.column_stack([
        1.0 / (1.0 + r),
        -(a - d) * r * np.log(x / c) / denom,
        (a - d) * r * b / (c * denom),
        1.0 - 1.0 / (1.0 + r),
    ])


INTERIOR_CASES = [
    (ModelKind.EXPONENTIAL, (2.0, 0.8, -0.3), np.linspace(0.2, 5.0, 40)),
    (ModelKind.LOGISTIC, (3.0, 1.4, 2.0), np.linspace(0.5, 4.0, 40)),
    (ModelKind.POWER_LAW, (1.5, 0.6, 2.0), np.linspace(0.5, 9.0, 40)),
    (ModelKind.FOUR_PL, (30.0, 1.8, 2.5, 25.0), np.linspace(0.5, 12.0, 40)),
]


@pytest.mark.parametrize("kind,params,x", INTERIOR_CASES,
                         ids=[c[0].value for c in INTERIOR_CASES])
def test_numeric_jacobian_matches_analytic(kind, params, x):
    numeric = numeric_jacobian(lambda p: eval_model(kind, p, x),
                               np.array(params))
    analytic = _analytic_jacobian(kind, params, x)
    scale = np.maximum(np.abs(analytic), 1e-6)
    assert np.all(np.abs(numeric - analytic) / scale < 1e-4)
