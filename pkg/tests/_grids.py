"""The documented parameter recovery grid shared by the curve-fit tests and
the acceptance suite: >= 25 parameter combinations per model family, each
with an x-range over which the curve is identifiable."""

from itertools import product

from taction.curvefit import ModelKind


def _exp_grid():
    for a, b, c in product((0.5, 2.0, 10.0), (0.5, 1.0, 3.0), (-1.0, 0.0, 2.0)):
        yield (a, b, c), 0.0, 5.0 / b


def _logistic_grid():
    for a, b, c in product((2.0, 10.0, -5.0), (0.8, 2.0, 5.0), (1.5, 3.0, 6.0)):
        yield (a, b, c), c - 8.0 / b, c + 8.0 / b


def _power_grid():
    for a, b, c in product((0.5, 2.0, -1.5), (0.4, 1.3, -0.6), (0.0, 5.0, -2.0)):
        yield (a, b, c), 0.2, 10.0


def _fourpl_grid():
    for a, b, c, d_off in product((30.0, 10.0), (0.8, 1.5, 2.5, 4.0),
                                  (1.0, 3.0), (-5.0, 4.0)):
        yield (a, b, c, a + d_off), 0.05, 8.0 * c


RECOVERY_GRID = {
    ModelKind.EXPONENTIAL: list(_exp_grid()),
    ModelKind.LOGISTIC: list(_logistic_grid()),
    ModelKind.POWER_LAW: list(_power_grid()),
    ModelKind.FOUR_PL: list(_fourpl_grid()),
}

assert all(len(v) >= 25 for v in RECOVERY_GRID.values())


def relative_errors(estimated, truth):
    """Per-parameter |error| / |truth| (absolute where truth is ~zero)."""
    out = []
    for est, true in zip(estimated, truth):
        denom = abs(true) if abs(true) > 1e-8 else 1.0
        out.append(abs(est - true) / denom)
    return out
