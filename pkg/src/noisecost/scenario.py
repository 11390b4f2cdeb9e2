"""Canned scenarios: the vanishing-cost sequence that shows an optimum can fail
to exist without a noise bound, the kinked value function ``1 / (|d| + a)``,
and a buyer learning about product quality."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bayes import DecisionProblem, Utility, posterior
from .costs import NoiseCostFunction, experiment_cost
from .errors import ValidationError
from .experiments import make_uniform_experiment
from .measures import MixedDistribution
from .optimize import ClarkeInterval, SolverResult, clarke_interval_numeric, solve

LIMIT_DEMO_LABEL = "limit demo: not an admissible experiment"
TRADE_DEMO_LABEL = ("placeholder utility: u(theta, buy) = theta - price, "
                    "u(theta, not-buy) = 0")


@dataclass(frozen=True)
class NonexistenceRow:
    d: float
    posterior: float
    posterior_limit: float
    cost: float


@dataclass(frozen=True)
class NonexistenceReport:
    p: float
    wide: float
    theta0: float
    theta1: float
    rows: tuple
    label: str = LIMIT_DEMO_LABEL

    @property
    def costs(self) -> list:
        return [r.cost for r in self.rows]

    @property
    def costs_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.costs, self.costs[1:]))


def nonexistence_sequence(p: float, d_list: Sequence[float], c: NoiseCostFunction,
                      wide: float = 1e4, theta0: float = 0.0,
                      theta1: float = 1.0) -> NonexistenceReport:
    """Two atoms; ``theta0`` gets width ``wide`` (standing in for infinite
    noise) and ``theta1`` gets each ``d`` in turn.

    ``posterior`` is ``Pr(theta1 | s = theta1)`` under the finite stand-in;
    ``posterior_limit`` is the same ratio with the ``theta0`` density set to 0.
    """
    if not 0.0 < p < 1.0:
        raise ValidationError("p must lie in (0, 1)")
    ds = [float(d) for d in d_list]
    if any(d <= 0 for d in ds) or any(b <= a for a, b in zip(ds, ds[1:])):
        raise ValidationError("d_list must be positive and increasing")
    F = MixedDistribution.from_atoms([theta0, theta1], [1.0 - p, p])
    rows = []
    for d in ds:
        H = make_uniform_experiment({theta0: wide, theta1: d})
        post = posterior(F, H, theta1).distribution
        pr1 = dict(post.atoms).get(float(theta1), 0.0)
        rows.append(NonexistenceRow(d, pr1, 1.0, experiment_cost(c, H, F)))
    return NonexistenceReport(p, float(wide), float(theta0), float(theta1), tuple(rows))


@dataclass(frozen=True)
class ClarkeRow:
    delta: float
    numeric: ClarkeInterval
    closed_form: ClarkeInterval


def clarke_example(a: float, delta_list: Sequence[float], h0: float = 1e-2) -> list[ClarkeRow]:
    """Clarke derivative of ``W(d) = 1 / (|d| + a)``, numerically and in closed
    form; at ``d = 0`` the interval is ``[-1/a^2, 1/a^2]`` and contains 0."""
    if not a > 0:
        raise ValidationError("a must be positive")

    def W(d):
        return 1.0 / (abs(d) + a)

    rows = []
    for d in delta_list:
        d = float(d)
        if d == 0:
            exact = ClarkeInterval(-1.0 / a ** 2, 1.0 / a ** 2)
        else:
            g = -np.sign(d) / (abs(d) + a) ** 2
            exact = ClarkeInterval(float(g), float(g))
        rows.append(ClarkeRow(d, clarke_interval_numeric(W, d, h0), exact))
    return rows


def trade_problem(price: float) -> DecisionProblem:
    """Actions 0 (not buy) and 1 (buy)."""
    return DecisionProblem((0.0, 1.0), Utility.trade(price))


def trade_demo(price: float, qualities: Sequence[float], p: float, c: NoiseCostFunction,
               b: float, **solver_args) -> SolverResult:
    """Buyer choosing whether to buy at ``price`` when quality is
    ``qualities[1]`` with probability ``p`` and ``qualities[0]`` otherwise."""
    q0, q1 = (float(q) for q in qualities)
    if not q0 < q1:
        raise ValidationError("qualities must be two increasing values")
    if not 0.0 < p < 1.0:
        raise ValidationError("p must lie in (0, 1)")
    F = MixedDistribution.from_atoms([q0, q1], [1.0 - p, p])
    return solve(F, trade_problem(price), c, b, **solver_args)
