import math

import pytest

from noisecost.costs import NoiseCostFunction
from noisecost.errors import ValidationError
from noisecost.scenario import (LIMIT_DEMO_LABEL, clarke_example, nonexistence_sequence,
                                trade_demo)

EXP = NoiseCostFunction.exp_decay(1.0, 1.0)


def test_nonexistence_costs_fall():
    rep = nonexistence_sequence(0.5, [1, 10, 100], EXP)
    assert rep.costs_decreasing and rep.costs[-1] < 0.02
    # (1 - e^-d) / d per state, halved by the prior
    for row in rep.rows:
        closed = 0.5 * (1 - math.exp(-row.d)) / row.d + 0.5 * (1 - math.exp(-1e4)) / 1e4
        assert row.cost == pytest.approx(closed, rel=1e-12)
    assert rep.label == LIMIT_DEMO_LABEL


def test_nonexistence_equal_widths_gives_prior():
    rep = nonexistence_sequence(0.3, [5.0], EXP, wide=5.0)
    assert rep.rows[0].posterior == pytest.approx(0.3, abs=1e-15)


def test_nonexistence_posterior_density_ratio():
    p, wide = 0.4, 1e4
    rep = nonexistence_sequence(p, [1.0, 10.0], EXP, wide=wide)
    for row in rep.rows:
        h, H = 1 / (2 * row.d), 1 / (2 * wide)
        assert row.posterior == pytest.approx(p * h / (p * h + (1 - p) * H), rel=1e-12)
        assert row.posterior_limit == 1.0
    assert rep.rows[0].posterior > 0.99


def test_nonexistence_validation():
    with pytest.raises(ValidationError):
        nonexistence_sequence(0.5, [10, 1], EXP)
    with pytest.raises(ValidationError):
        nonexistence_sequence(1.0, [1], EXP)


@pytest.mark.parametrize("a", [1.0, 2.0])
def test_clarke_example(a):
    rows = clarke_example(a, [0.0, 1.0, -1.0])
    assert rows[0].numeric.lo == pytest.approx(-1 / a ** 2, abs=1e-5)
    assert rows[0].numeric.hi == pytest.approx(1 / a ** 2, abs=1e-5)
    assert rows[0].numeric.contains(0.0)
    assert rows[1].numeric.lo == pytest.approx(-1 / (1 + a) ** 2, abs=1e-6)
    assert rows[2].numeric.hi == pytest.approx(1 / (1 + a) ** 2, abs=1e-6)
    for r in rows:
        assert r.numeric.lo == pytest.approx(r.closed_form.lo, abs=1e-5)


def test_trade_price_below_qualities():
    res = trade_demo(-0.5, [0.0, 1.0], 0.5, EXP, 2.0)
    assert res.widths == {0.0: 2.0, 1.0: 2.0}
    assert res.rule.actions == (1.0,)


def test_trade_cheap_information_separates():
    c = NoiseCostFunction.exp_decay(1e-3, 1.0)
    res = trade_demo(0.5, [0.0, 1.0], 0.5, c, 2.0)
    # full-information value 0.25 minus the cost of the separating experiment
    expected = 0.25 - 1e-3 * (0.5 * 1.0 + 0.5 * (1 - math.exp(-2.0)) / 2.0)
    assert res.V == pytest.approx(expected, abs=1e-9)
    assert res.rule(0.0) == 0.0 and res.rule(0.5) == 1.0 and res.rule(2.5) == 1.0


def test_trade_costly_information_uses_prior_mean():
    res = trade_demo(0.7, [0.0, 1.0], 0.5, NoiseCostFunction.exp_decay(100.0, 1.0), 2.0)
    assert res.widths == {0.0: 2.0, 1.0: 2.0}
    # prior mean 0.5 is below the price, so no purchase on the shared support
    assert res.rule(0.0) == 0.0 and res.rule(1.5) == 0.0 and res.rule(2.5) == 1.0
