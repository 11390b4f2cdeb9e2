import json
import math
from pathlib import Path

import numpy as np
import pytest

from oracles import two_state_value_grid

from noisecost.bayes import DecisionProblem, DecisionRule, Utility
from noisecost.costs import NoiseCostFunction
from noisecost.errors import NonLipschitzSignal, ValidationError
from noisecost.measures import MixedDistribution
from noisecost.optimize import (ClarkeInterval, StateObjective, clarke_interval_numeric,
                                clarke_subdiff, golden_section_max, optimize_width,
                                result_for_widths, solve, verify_foc, w_eval)

DATA = Path(__file__).parent / "data"
QL = DecisionProblem((0.0, 0.5, 1.0), Utility.quadratic_loss())
TWO = MixedDistribution.from_atoms([0.0, 1.0], [0.5, 0.5])
FLAT = DecisionProblem((0.0,), Utility.table([0.0], [0.0], [[0.7]]))
# correct action 0 at state 0; action 1 costs 1
STEP = DecisionProblem((0.0, 1.0), Utility.table([0.0], [0.0, 1.0], [[1.0, 0.0]]))


def test_w_eval_constant_rule_tent():
    tent = NoiseCostFunction.tent(1.0, 1.0)
    for d in (0.1, 0.5, 1.0):
        assert w_eval(d, 0.0, DecisionRule.constant(0.0), FLAT, tent) == \
            pytest.approx(0.7 - (1 - d / 2), abs=1e-14)


def test_w_eval_small_window_limit():
    c = NoiseCostFunction.exp_decay(1.0, 1.0)
    rule = DecisionRule((0.5,), (0.0, 1.0), (0.0,))
    limit = STEP.utility(0.0, 0.0) - float(c(0.0))
    assert w_eval(1e-9, 0.0, rule, STEP, c) == pytest.approx(limit, abs=1e-8)
    assert w_eval(0.0, 0.0, rule, STEP, c) == pytest.approx(limit, abs=1e-15)


def test_w_eval_one_jump_inside():
    c = NoiseCostFunction.tent(0.2, 2.0)
    rule = DecisionRule((0.3,), (0.0, 1.0), (0.0,))
    d = 0.8
    # share (0.8 - 0.3) / 1.6 of the window gets the wrong action
    expected = (1.1 / 1.6) * 1.0 + (0.5 / 1.6) * 0.0 - 0.2 * (1 - d / 4)
    assert w_eval(d, 0.0, rule, STEP, c) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_clarke_interval_of_kinked_function(a):
    f = lambda d: 1.0 / (abs(d) + a)
    iv = clarke_interval_numeric(f, 0.0)
    assert iv.lo == pytest.approx(-1 / a ** 2, abs=1e-5)
    assert iv.hi == pytest.approx(1 / a ** 2, abs=1e-5)
    iv = clarke_interval_numeric(f, 0.5)
    assert iv.lo == pytest.approx(-1 / (0.5 + a) ** 2, abs=1e-6)
    assert iv.hi - iv.lo < 1e-6


def test_clarke_interval_smooth_stationary():
    iv = clarke_interval_numeric(lambda d: -(d - 1) ** 2, 1.0)
    assert iv.contains(0.0, 1e-9) and iv.hi - iv.lo < 1e-6


def test_clarke_interval_rejects_divergence():
    with pytest.raises(NonLipschitzSignal):
        clarke_interval_numeric(lambda d: math.copysign(abs(d) ** 0.5, d) * 1e3, 0.0, h0=1e-2)


def test_clarke_interval_validation():
    with pytest.raises(ValidationError):
        ClarkeInterval(1.0, 0.0)
    with pytest.raises(ValidationError):
        ClarkeInterval(-math.inf, 0.0)


def test_analytic_and_numeric_subdiff_agree():
    rule = DecisionRule((0.3, 0.9), (0.0, 0.5, 1.0), (0.0, 0.5))
    c = NoiseCostFunction.cauchy(0.3)
    for d in (0.1, 0.3, 0.55, 0.9, 1.4):
        a = clarke_subdiff(0.0, rule, QL, c, d)
        n = clarke_subdiff(0.0, rule, QL, c, d, method="numeric")
        assert a.lo == pytest.approx(n.lo, abs=1e-5) and a.hi == pytest.approx(n.hi, abs=1e-5)


def test_smooth_points_collapse():
    rule = DecisionRule((0.3,), (0.0, 1.0), (0.0,))
    c = NoiseCostFunction.exp_decay(1.0, 1.0)
    for d in (0.1, 0.6, 1.2):
        iv = clarke_subdiff(0.0, rule, STEP, c, d, method="numeric")
        assert iv.hi - iv.lo < 1e-4


def test_lipschitz_bound():
    rule = DecisionRule((0.3, 0.9), (0.0, 0.5, 1.0), (0.0, 0.5))
    c = NoiseCostFunction.tent(1.0, 1.5)
    obj = StateObjective(0.0, rule, QL, c)
    lo = 0.1
    xs = np.linspace(lo, 2.0, 400)
    ws = np.array([obj(x) for x in xs])
    q = np.abs(np.diff(ws) / np.diff(xs))
    vmin = min(QL.utility(0.0, a) for a in QL.actions) - 1.0
    vmax = max(QL.utility(0.0, a) for a in QL.actions)
    assert q.max() <= (vmax - vmin) / lo + 1e-9


def test_golden_section():
    x, _ = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-8)


def test_optimize_width_constant_utility_goes_to_bound():
    d = optimize_width(0.0, DecisionRule.constant(0.0), FLAT, NoiseCostFunction.tent(1.0, 3.0), 2.0)
    assert d == 2.0


def test_optimize_width_stops_at_kink():
    rule = DecisionRule((0.3,), (0.0, 1.0), (0.0,))
    d = optimize_width(0.0, rule, STEP, NoiseCostFunction.exp_decay(1e-3, 1.0), 2.0)
    assert d == pytest.approx(0.3, abs=1e-9)
    iv = clarke_subdiff(0.0, rule, STEP, NoiseCostFunction.exp_decay(1e-3, 1.0), d)
    assert iv.contains(0.0)


def _golden():
    return json.loads((DATA / "two_atom_golden.json").read_text())["cases"]


@pytest.mark.parametrize("name", ["exp_decay_1_1", "exp_decay_0.1_1"])
def test_solve_matches_golden(name):
    case = _golden()[name]
    c = NoiseCostFunction.exp_decay(case["cost_scale"], 1.0)
    res = solve(TWO, QL, c, 2.0)
    assert res.V == pytest.approx(case["V"], abs=1e-4)
    for t, d in case["delta"].items():
        assert res.widths[float(t)] == pytest.approx(d, abs=2e-3)
    assert res.converged and res.foc_passed
    assert max(e.residual for e in res.foc.values()) < 1e-5
    assert res.V == pytest.approx(res.B - res.C, abs=1e-9)


def test_golden_file_agrees_with_oracle():
    c = NoiseCostFunction.exp_decay(1.0, 1.0)
    V, d0, d1 = two_state_value_grid((0.0, 1.0), (0.5, 0.5), QL.actions, QL.utility,
                                     lambda d: np.where(d > 0, (1 - np.exp(-d)) / np.where(d > 0, d, 1), 1.0),
                                     2.0, step=1e-2)
    assert V == pytest.approx(_golden()["exp_decay_1_1"]["V"], abs=1e-9)


def test_perturbed_solution_fails_foc():
    c = NoiseCostFunction.exp_decay(1.0, 1.0)
    res = solve(TWO, QL, c, 2.0)
    # optimal rule held, one width moved 0.05 inside the bound
    rep = verify_foc(res, QL, c, 2.0, widths={0.0: 1.95, 1.0: 2.0})
    assert not rep.passed and rep.entries[0.0].kind == "interior"
    assert rep.entries[0.0].residual > 1e-5


def test_reoptimised_rule_can_certify_perturbed_widths():
    # the optimal rule for given widths puts a breakpoint at each window edge,
    # so small perturbations become kink maxima of W; larger ones still fail
    c = NoiseCostFunction.exp_decay(1.0, 1.0)
    assert result_for_widths(TWO, QL, c, 2.0, {0.0: 1.95, 1.0: 2.0}).foc_passed
    res = result_for_widths(TWO, QL, c, 2.0, {0.0: 1.5, 1.0: 2.0})
    assert not res.foc_passed and res.foc[0.0].residual > 1e-3


def test_single_atom_goes_to_bound():
    res = solve(MixedDistribution.point(0.3), QL, NoiseCostFunction.exp_decay(1.0, 1.0), 1.5)
    assert res.widths == {0.3: 1.5}
    assert res.rule(0.3) == 0.5 and len(res.rule.actions) == 1


def test_expensive_cost_gives_boundary():
    c = NoiseCostFunction.exp_decay(100.0, 1.0)
    res = solve(TWO, QL, c, 2.0)
    assert res.widths == {0.0: 2.0, 1.0: 2.0}
    assert all(e.kind == "boundary" and e.passed for e in res.foc.values())


def test_history_is_monotone():
    F = MixedDistribution.from_atoms([0.0, 0.4, 1.0], [0.3, 0.3, 0.4])
    res = solve(F, QL, NoiseCostFunction.cauchy(0.05), 2.0, restarts=3)
    assert all(b >= a - 1e-10 for a, b in zip(res.history, res.history[1:]))


def test_verify_foc_with_explicit_widths():
    c = NoiseCostFunction.exp_decay(1.0, 1.0)
    res = solve(TWO, QL, c, 2.0)
    assert verify_foc(res, QL, c, 2.0).passed
    assert not verify_foc(res, QL, c, 2.0, widths={0.0: 1.9, 1.0: 2.0}).passed


def test_solve_rejects_bad_bound():
    with pytest.raises(ValidationError):
        solve(TWO, QL, NoiseCostFunction.exp_decay(1.0, 1.0), 0.0)
