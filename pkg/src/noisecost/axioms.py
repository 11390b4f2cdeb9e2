"""Randomised property suites for the cost functional: consistency,
prior-independence, mixture linearity, continuity in the width and strict
monotonicity under restricted garbling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import NoiseCostFunction, experiment_cost, noise_cost
from .experiments import (Experiment, GriddedDensity, MixtureOfUniforms, NoiseDistribution,
                          RestrictedKernelSpec, Uniform, _mix_laws, average_experiment,
                          restricted_garble)
from .measures import MixedDistribution, Quadrature

# 20 halvings leave a gap of about 1e-6 times the slope of the average cost
CONTINUITY_FINAL_GAP = 1e-5
# identities are checked at 2e-9, so integrate two orders tighter
SUITE_QUADRATURE = Quadrature(abs_tol=1e-11)


@dataclass
class SuiteResult:
    """``worst`` is the largest checked quantity; a check fails when its
    quantity exceeds ``limit``."""

    name: str
    limit: float
    checked: int = 0
    failed: int = 0
    worst: float = float("-inf")
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.failed == 0

    def record(self, value: float, detail) -> None:
        self.checked += 1
        self.worst = max(self.worst, value)
        if not value <= self.limit:
            self.failed += 1
            if len(self.failures) < 5:
                self.failures.append(detail)


def random_cost(rng: np.random.Generator, reach: float) -> NoiseCostFunction:
    """Exp-decay, Cauchy or a tent wide enough to stay strictly decreasing on
    ``[0, reach]``."""
    kind = rng.integers(3)
    if kind == 0:
        return NoiseCostFunction.exp_decay(rng.uniform(0.1, 2.0), rng.uniform(0.2, 3.0))
    if kind == 1:
        return NoiseCostFunction.cauchy(rng.uniform(0.1, 2.0))
    return NoiseCostFunction.tent(rng.uniform(0.1, 2.0), reach * rng.uniform(1.05, 2.0))


def random_law(rng: np.random.Generator, b: float) -> NoiseDistribution:
    """Uniform, tent, truncated-Gaussian shape or uniform mixture, radius < b."""
    kind = rng.integers(4)
    r = rng.uniform(0.05, 0.95) * b
    if kind == 0:
        return Uniform(r)
    if kind == 1:
        return GriddedDensity.tent(r)
    if kind == 2:
        sd = rng.uniform(0.2, 0.6) * r
        return GriddedDensity.from_function(lambda x: np.exp(-0.5 * (x / sd) ** 2), r, n=101)
    m = int(rng.integers(2, 4))
    w = rng.dirichlet(np.ones(m))
    widths = np.sort(rng.uniform(0.05, 0.95, m)) * b
    return MixtureOfUniforms(tuple(w), tuple(widths))


def random_prior(rng: np.random.Generator, max_atoms: int = 5) -> MixedDistribution:
    n = int(rng.integers(1, max_atoms + 1))
    locs = np.sort(rng.choice(np.arange(-20, 21), n, replace=False) / 4.0)
    return MixedDistribution.from_atoms(locs, rng.dirichlet(np.ones(n)))


def _scenario(rng):
    b = rng.uniform(0.5, 3.0)
    F = random_prior(rng)
    laws = {float(t): random_law(rng, b) for t in F.locations}
    return F, Experiment(laws, bound=b), random_cost(rng, b), b


def consistency_suite(rng, n: int, tol: float) -> SuiteResult:
    out = SuiteResult("consistency", tol)
    for i in range(n):
        F, P, c, _ = _scenario(rng)
        lhs = experiment_cost(c, P, F, SUITE_QUADRATURE)
        rhs = noise_cost(c, average_experiment(P, F), SUITE_QUADRATURE)
        out.record(abs(lhs - rhs), (i, lhs, rhs))
    return out


def prior_independence_suite(rng, n: int, tol: float) -> SuiteResult:
    out = SuiteResult("prior-independence", tol)
    for i in range(n):
        b = rng.uniform(0.5, 3.0)
        law, c = random_law(rng, b), random_cost(rng, b)
        F, G = random_prior(rng), random_prior(rng)
        P = Experiment({float(t): law for t in F.locations}, bound=b, default=law)
        q = SUITE_QUADRATURE
        costs = (experiment_cost(c, P, F, q), experiment_cost(c, P, G, q))
        out.record(abs(costs[0] - costs[1]), (i, *costs))
    return out


def linearity_suite(rng, n: int, tol: float) -> SuiteResult:
    out = SuiteResult("mixture-linearity", tol)
    for i in range(n):
        b = rng.uniform(0.5, 3.0)
        P, Q, c = random_law(rng, b), random_law(rng, b), random_cost(rng, b)
        a = float(rng.uniform(0.0, 1.0))
        q = SUITE_QUADRATURE
        mixed = noise_cost(c, _mix_laws((P, Q), (a, 1.0 - a)), q)
        split = a * noise_cost(c, P, q) + (1.0 - a) * noise_cost(c, Q, q)
        out.record(abs(mixed - split), (i, mixed, split))
    return out


def continuity_suite(rng, n: int, tol: float, steps: int = 20) -> SuiteResult:
    """Costs of ``H_{d + 2^-j}`` approach the cost of ``H_d`` monotonically;
    the recorded quantity is the final gap (non-monotone sequences record inf)."""
    out = SuiteResult("continuity", CONTINUITY_FINAL_GAP)
    for i in range(n):
        b = rng.uniform(0.5, 3.0)
        d, c = rng.uniform(0.05, 0.9) * b, random_cost(rng, 2 * b)
        target = noise_cost(c, Uniform(d))
        gaps = [abs(noise_cost(c, Uniform(d + 2.0 ** -j)) - target) for j in range(1, steps + 1)]
        monotone = all(g1 <= g0 + tol for g0, g1 in zip(gaps, gaps[1:]))
        out.record(gaps[-1] if monotone else float("inf"), (i, gaps))
    return out


def random_garble(rng, law: NoiseDistribution) -> RestrictedKernelSpec:
    r = law.radius
    x0 = rng.uniform(0.0, 0.4) * r
    xhat = x0 + rng.uniform(0.1, 0.5) * r
    x1 = xhat + rng.uniform(0.1, 0.6) * r
    return RestrictedKernelSpec(x0, xhat, x1, float(rng.uniform(0.1, 0.9)))


def blackwell_suite(rng, n: int, margin: float) -> SuiteResult:
    """Garbling must lower the cost by more than ``margin``; the recorded
    quantity is the negated cost drop."""
    out = SuiteResult("blackwell-monotonicity", -margin)
    for i in range(n):
        b = rng.uniform(0.5, 3.0)
        law = random_law(rng, b)
        spec = random_garble(rng, law)
        c = random_cost(rng, spec.x1)
        q = SUITE_QUADRATURE
        drop = noise_cost(c, law, q) - noise_cost(c, restricted_garble(law, spec), q)
        out.record(-drop, (i, drop))
    return out


@dataclass
class AxiomReport:
    seed: int
    suites: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)


def run_axiom_suites(seed: int = 0, scenarios: int = 200, garbles: int = 100,
                     tol: float = 2e-9, margin: float = 1e-9) -> AxiomReport:
    """All five suites from one seeded generator, in a fixed order."""
    rng = np.random.default_rng(seed)
    suites = [
        consistency_suite(rng, scenarios, tol),
        prior_independence_suite(rng, scenarios, tol),
        linearity_suite(rng, scenarios, tol),
        continuity_suite(rng, max(1, scenarios // 4), tol),
        blackwell_suite(rng, garbles, margin),
    ]
    return AxiomReport(seed, suites)
