"""Approximation of an even unimodal noise density from below by mixtures of
centred uniforms, and construction of a uniform experiment that dominates a
given experiment in net benefit.

On the grid ``j * spacing`` (``j = 1..k``, ``k = 3**n``, ``spacing = 2**-n``) the
mixture density ``Q'(x) = sum_j alpha_j / (2 j spacing) * 1{|x| <= j spacing}``
is a step function; matching ``P'`` at every node gives an upper-triangular
system that is solved by back-substitution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bayes import DecisionProblem, DecisionRule, exact_rule, uniform_rule
from .costs import NoiseCostFunction, experiment_cost
from .errors import NegativeWeight, ValidationError
from .experiments import Experiment, MixtureOfUniforms, NoiseDistribution, make_uniform_experiment
from .measures import DEFAULT_QUADRATURE, MixedDistribution, Quadrature, discretize
from .optimize import StateObjective, _maximise

NEGATIVE_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ApproxGrid:
    n: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 0):
            raise ValidationError("grid level n must be a nonnegative integer")

    @property
    def k(self) -> int:
        return 3 ** int(self.n)

    @property
    def spacing(self) -> float:
        return 2.0 ** -int(self.n)

    @property
    def span(self) -> float:
        return self.k * self.spacing

    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.k + 1)


@dataclass(frozen=True, eq=False)
class UniformMixtureApprox:
    grid: ApproxGrid
    weights: np.ndarray
    target: NoiseDistribution

    @property
    def widths(self) -> np.ndarray:
        return self.grid.nodes()

    @property
    def weight_sum(self) -> float:
        return math.fsum(self.weights)

    def density(self, x):
        """``Q'(x)``, the step-function mixture density."""
        a = np.abs(np.asarray(x, dtype=float))
        heights = self.weights / (2.0 * self.widths)
        # tail sums: Q' on ((j-1) spacing, j spacing] equals sum_{i >= j} heights_i
        tail = np.concatenate([np.cumsum(heights[::-1])[::-1], [0.0]])
        j = np.ceil(a / self.grid.spacing - 1e-12).astype(int)
        j = np.clip(j, 1, self.grid.k + 1)
        return tail[j - 1]

    def as_noise(self) -> MixtureOfUniforms:
        keep = self.weights > 0
        return MixtureOfUniforms.sub_probability(tuple(self.weights[keep]), tuple(self.widths[keep]))

    def check(self, points: int = 10_000) -> dict:
        """Worst violations of the below-target, node-interpolation and
        sub-probability invariants."""
        r = 1.05 * max(self.grid.span, self.target.radius)
        xs = np.linspace(-r, r, points)
        below = float(np.max(self.density(xs) - self.target.pdf(xs)))
        nodes = self.grid.nodes()
        interp = float(np.max(np.abs(self.density(nodes) - self.target.pdf(nodes))))
        return {"below_target": below, "interpolation": interp, "weight_sum": self.weight_sum}


def mixture_weights(P: NoiseDistribution, grid: ApproxGrid) -> UniformMixtureApprox:
    """Back-substitution for the mixture weights:
    ``alpha_k = 2 k d P'(k d)``, ``alpha_j = 2 j d (P'(j d) - P'((j+1) d))``."""
    nodes = grid.nodes()
    heights = np.asarray(P.pdf(nodes), dtype=float)
    drops = heights - np.append(heights[1:], 0.0)
    alpha = 2.0 * nodes * drops
    worst = float(alpha.min())
    if worst < -NEGATIVE_WEIGHT_TOL:
        j = int(alpha.argmin()) + 1
        raise NegativeWeight(f"weight {worst:.3g} at node {j}: target density is not unimodal")
    # roundoff-level negatives are zero weights
    alpha = np.where(alpha < 0, 0.0, alpha)
    return UniformMixtureApprox(grid, alpha, P)


@dataclass(frozen=True)
class ConvergenceReport:
    ns: tuple
    l1: tuple
    mass_gap: tuple

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.l1, self.l1[1:]))


def approx_converges(P: NoiseDistribution, n_list: Sequence[int],
                     q: Quadrature = DEFAULT_QUADRATURE) -> ConvergenceReport:
    """L1 distance ``∫|Q'_n - P'|`` by quadrature for each ``n``.

    ``mass_gap = 1 - sum(alpha)`` must agree, since ``Q'_n`` lies below ``P'``.
    """
    l1, gaps = [], []
    for n in n_list:
        approx = mixture_weights(P, ApproxGrid(int(n)))
        r = max(approx.grid.span, P.radius)
        cuts = np.concatenate([approx.grid.nodes(), P.knots()])
        half = q.integrate(lambda x: abs(float(approx.density(x)) - float(P.pdf(x))), 0.0, r, cuts)
        l1.append(2.0 * half)
        gaps.append(P.total_mass - approx.weight_sum)
    return ConvergenceReport(tuple(int(n) for n in n_list), tuple(l1), tuple(gaps))


def best_uniform_component(theta: float, rule: DecisionRule, problem: DecisionProblem,
                           c: NoiseCostFunction, grid: ApproxGrid,
                           bound: float = math.inf) -> tuple[int, float]:
    """Best width ``j * spacing`` (``j = 0`` is the perfect signal) against a
    fixed rule, over widths below ``bound``; ties go to the smaller ``j``."""
    obj = StateObjective(theta, rule, problem, c)
    best_j, best_v = 0, obj(0.0)
    for j in range(1, grid.k + 1):
        w = j * grid.spacing
        if w >= bound:
            break
        v = obj(w)
        if v > best_v + 1e-12 * max(1.0, abs(best_v)):
            best_j, best_v = j, v
    return best_j, best_v


@dataclass
class DominanceReport:
    """Uniform experiment ``H`` built against the incumbent's optimal rule.

    ``widths`` maps each state to ``delta(theta)``; 0.0 stands for a perfect
    signal, in which case ``experiment`` is None.  ``V_H_fixed_rule`` scores
    ``H`` under the incumbent's rule, so ``V_H - V_H_fixed_rule`` is the gain
    from re-optimising the rule.
    """

    widths: dict
    experiment: Experiment | None
    V_P: float
    V_H_fixed_rule: float
    V_H: float
    rule_P: DecisionRule
    rule_H: DecisionRule
    choices: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.V_H - self.V_P


def dominating_uniform_experiment(P: Experiment, F: MixedDistribution, problem: DecisionProblem,
                                  c: NoiseCostFunction, n_max: int = 4,
                                  bound: float | None = None, refine: bool = True,
                                  q: Quadrature = DEFAULT_QUADRATURE) -> DominanceReport:
    """Uniform experiment at least as valuable as ``P``.

    Each state takes the best grid width over levels ``n <= n_max`` against
    ``P``'s optimal rule.  With ``refine`` the continuous best width below the
    bound is also a candidate; every even unimodal law is a mixture of centred
    uniforms, so that candidate alone already dominates state by state.
    """
    if not P.signal.is_additive:
        raise ValidationError("dominance construction needs an additive signal")
    bound = P.bound if bound is None else float(bound)
    G = discretize(F)
    locs = [float(x) for x in G.locations]
    masses = [float(m) for m in G.masses]
    laws = [P.noise_for(t) for t in locs]
    rule_P, B_P = exact_rule(locs, masses, laws, problem)
    V_P = B_P - experiment_cost(c, P, G, q)

    reach = bound if math.isfinite(bound) else max(
        ApproxGrid(n_max).span, max(law.radius for law in laws))
    cap = reach * (1.0 - 1e-12)
    widths, values, choices = [], [], {}
    for theta in locs:
        best = (0.0, -math.inf, None)
        for n in range(1, n_max + 1):
            grid = ApproxGrid(n)
            j, v = best_uniform_component(theta, rule_P, problem, c, grid, bound)
            if v > best[1] + 1e-12 * max(1.0, abs(v)):
                best = (j * grid.spacing, v, (n, j))
        if refine:
            obj = StateObjective(theta, rule_P, problem, c)
            d, v = _maximise(obj, obj.kinks(cap), cap, 1e-10)
            if v > best[1] + 1e-12 * max(1.0, abs(v)):
                best = (d, v, "continuous")
        widths.append(best[0])
        values.append(best[1])
        choices[theta] = best[2]

    V_fixed = math.fsum(m * v for m, v in zip(masses, values))
    rule_H, B_H = uniform_rule(locs, masses, widths, problem)
    C_H = math.fsum(m * float(c.average(w)) for m, w in zip(masses, widths))
    experiment = None
    if all(w > 0 for w in widths):
        experiment = make_uniform_experiment(dict(zip(locs, widths)), P.signal, P.bound)
    return DominanceReport(dict(zip(locs, widths)), experiment, V_P, V_fixed, B_H - C_H,
                           rule_P, rule_H, choices)
