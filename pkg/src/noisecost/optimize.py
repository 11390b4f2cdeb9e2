"""Per-state value ``W_theta(delta)``, Clarke generalized derivatives, width
optimisation and the alternating-ascent solver for optimal uniform experiments.

With the decision rule held fixed the net benefit separates across states:

    V(delta, psi) = sum_i m_i * W_i(delta_i; psi),
    W_i(d) = (1 / 2d) * ∫_{-d}^{d} [u(theta_i, psi(theta_i + x)) - c(x)] dx,

so each half-step of the solver is a one-dimensional global maximisation over
``(0, b]`` whose kinks are known in advance.
"""

from __future__ import annotations

import bisect
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .bayes import DecisionProblem, DecisionRule, uniform_rule
from .costs import NoiseCostFunction
from .errors import NonLipschitzSignal, ValidationError
from .measures import MixedDistribution, discretize

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# joint moves of two widths escape points where single-width moves all lose
PAIR_SCAN_MAX_STATES = 8
PAIR_SCAN_POINTS = 16


@dataclass(frozen=True)
class ClarkeInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi and math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValidationError(f"invalid Clarke interval [{self.lo}, {self.hi}]")

    def distance(self, value: float = 0.0) -> float:
        if value < self.lo:
            return self.lo - value
        if value > self.hi:
            return value - self.hi
        return 0.0

    def contains(self, value: float = 0.0, tol: float = 0.0) -> bool:
        return self.distance(value) <= tol


class StateObjective:
    """``W_theta`` for a fixed rule, with analytic one-sided derivatives."""

    def __init__(self, theta: float, rule: DecisionRule, problem: DecisionProblem,
                 c: NoiseCostFunction):
        self.theta = float(theta)
        self.rule = rule
        self.c = c
        self.bps = [float(b) for b in rule.breakpoints]
        u = problem.utility(self.theta, np.asarray(rule.actions, dtype=float))
        self.u = [float(v) for v in np.broadcast_to(u, (len(rule.actions),))]
        u_at = problem.utility(self.theta, np.asarray(rule.at_breakpoints, dtype=float)) \
            if rule.at_breakpoints else []
        self.u_at = [float(v) for v in np.broadcast_to(u_at, (len(rule.at_breakpoints),))]
        self.c0 = float(c(0.0))

    def benefit_integral(self, delta: float) -> float:
        """``∫_{-delta}^{delta} u(theta, psi(theta + x)) dx``."""
        lo, hi = self.theta - delta, self.theta + delta
        bps, u = self.bps, self.u
        k = bisect.bisect_right(bps, lo)
        end = bisect.bisect_left(bps, hi)
        total, left = 0.0, lo
        while k < end:
            total += (bps[k] - left) * u[k]
            left = bps[k]
            k += 1
        return total + (hi - left) * u[k]

    def at_zero(self) -> float:
        """Perfect-signal value ``u(theta, psi(theta)) - c(0)``."""
        k = bisect.bisect_left(self.bps, self.theta)
        if k < len(self.bps) and self.bps[k] == self.theta:
            return self.u_at[k] - self.c0
        return self.u[k] - self.c0

    def __call__(self, delta: float) -> float:
        if delta <= 0:
            return self.at_zero()
        cost = float(self.c.antiderivative(delta))
        return (self.benefit_integral(delta) - 2.0 * cost) / (2.0 * delta)

    def _u_piece(self, s: float, side: str) -> float:
        if side == "right":
            return self.u[bisect.bisect_right(self.bps, s)]
        return self.u[bisect.bisect_left(self.bps, s)]

    def one_sided(self, delta: float) -> tuple[float, float]:
        """``(W'(delta-), W'(delta+))`` from ``W' = (v(d) + v(-d)) / 2d - W / d``."""
        w = self(delta)
        cd = float(self.c(delta))
        up, dn = self.theta + delta, self.theta - delta
        right = (self._u_piece(up, "right") + self._u_piece(dn, "left") - 2 * cd) / (2 * delta) - w / delta
        left = (self._u_piece(up, "left") + self._u_piece(dn, "right") - 2 * cd) / (2 * delta) - w / delta
        return left, right

    def kinks(self, bound: float) -> list[float]:
        pts = {abs(b - self.theta) for b in self.bps}
        pts.update(float(k) for k in self.c.kinks())
        return sorted(p for p in pts if 0.0 < p < bound)


def w_eval(delta: float, theta: float, rule: DecisionRule, problem: DecisionProblem,
           c: NoiseCostFunction) -> float:
    """Average of ``u(theta, psi(sigma_theta(x))) - c(x)`` over ``x ~ H_delta``;
    ``delta = 0`` gives the perfect-signal value."""
    return StateObjective(theta, rule, problem, c)(delta)


def clarke_interval_numeric(f: Callable[[float], float], x: float, h0: float = 1e-2,
                            h_min: float = 1e-7) -> ClarkeInterval:
    """Convex hull of the one-sided derivative limits of ``f`` at ``x``.

    Each side uses difference quotients with the step halved from ``h0`` down to
    ``h_min``, followed by one Richardson extrapolation of the last two.
    """
    if not h0 > h_min:
        raise ValidationError("h0 must exceed the minimum step 1e-7")
    right = one_sided_derivative(f, x, 1.0, h0, h_min)
    left = one_sided_derivative(f, x, -1.0, h0, h_min)
    return ClarkeInterval(min(left, right), max(left, right))


def one_sided_derivative(f: Callable[[float], float], x: float, sign: float,
                         h0: float = 1e-2, h_min: float = 1e-7) -> float:
    """Right (``sign=1``) or left (``sign=-1``) derivative of ``f`` at ``x``."""
    fx = f(x)
    qs, h = [], h0
    while h >= h_min:
        qs.append(sign * (f(x + sign * h) - fx) / h)
        h *= 0.5
    # a Lipschitz f has quotients that settle; steady growth means a blow-up
    growth = [abs(b) / abs(a) for a, b in zip(qs, qs[1:]) if a != 0]
    if len(growth) >= 5 and all(g > 1.2 for g in growth[-5:]) and \
            abs(qs[-1]) > 1e2 * max(1.0, abs(qs[0])):
        raise NonLipschitzSignal(f"difference quotients diverge at {x!r}")
    if len(qs) < 2:
        return qs[-1]
    return 2.0 * qs[-1] - qs[-2]


def clarke_subdiff(theta: float, rule: DecisionRule, problem: DecisionProblem,
                   c: NoiseCostFunction, delta: float, h0: float = 1e-2,
                   method: str = "analytic") -> ClarkeInterval:
    """Clarke generalized derivative of ``W_theta`` at ``delta > 0``.

    ``method="analytic"`` uses the closed-form one-sided derivatives of the
    piecewise expression; ``"numeric"`` uses difference quotients.
    """
    if not delta > 0:
        raise ValidationError("Clarke derivative needs delta > 0")
    obj = StateObjective(theta, rule, problem, c)
    if method == "numeric":
        return clarke_interval_numeric(obj, delta, min(h0, 0.5 * delta))
    left, right = obj.one_sided(delta)
    return ClarkeInterval(min(left, right), max(left, right))


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-10) -> tuple[float, float]:
    """Maximise ``f`` on ``[a, b]`` assuming unimodality; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _maximise(obj: Callable[[float], float], kinks: list[float], bound: float,
              tol: float, scan: int = 16) -> tuple[float, float]:
    """Global max over ``{0} ∪ (0, bound]`` of a function smooth between ``kinks``."""
    candidates = [(0.0, obj(0.0))]
    edges = [0.0, *kinks, bound]
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs = [lo + (hi - lo) * k / scan for k in range(1, scan + 1)]
        ys = [obj(x) for x in xs]
        candidates.extend(zip(xs, ys))
        k = max(range(scan), key=lambda i: ys[i])
        a = xs[k - 1] if k > 0 else lo
        b = xs[k + 1] if k + 1 < scan else hi
        if b > a:
            x, y = golden_section_max(obj, a, b, tol)
            # a maximiser sitting on a kink or the bound is reported exactly there
            for edge in (lo, hi):
                if edge > 0 and abs(x - edge) < 1e-8:
                    x, y = edge, obj(edge)
            if x > 0:
                candidates.append((x, y))
    candidates.sort(key=lambda t: t[0])
    top = max(y for _, y in candidates)
    slack = 1e-13 * max(1.0, abs(top))
    return next((x, y) for x, y in candidates if y >= top - slack)


def optimize_width(theta: float, rule: DecisionRule, problem: DecisionProblem,
                   c: NoiseCostFunction, b: float, tol: float = 1e-10) -> float:
    """Global maximiser of ``W_theta`` on ``(0, b]`` plus the perfect-signal
    candidate (returned as 0.0); ties go to the smaller width."""
    obj = StateObjective(theta, rule, problem, c)
    return _maximise(obj, obj.kinks(b), b, tol)[0]


@dataclass(frozen=True)
class FocEntry:
    """First-order check for one state; ``kind`` is interior, boundary or perfect."""

    kind: str
    interval: ClarkeInterval | None
    residual: float
    passed: bool

    @property
    def contains_zero(self) -> bool:
        return self.passed


@dataclass
class SolverResult:
    states: tuple
    masses: tuple
    widths: dict
    rule: DecisionRule
    B: float
    C: float
    V: float
    bound: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    foc: dict = field(default_factory=dict)

    @property
    def foc_passed(self) -> bool:
        return all(e.passed for e in self.foc.values())


def _evaluate(locs, masses, widths, problem, c):
    rule, B = uniform_rule(locs, masses, widths, problem)
    C = math.fsum(m * float(c.average(w)) for m, w in zip(masses, widths))
    return rule, B, C


def _ascend(locs, masses, start, problem, c, b, tol, max_iter, pool):
    widths = [float(w) for w in start]
    rule, B, C = _evaluate(locs, masses, widths, problem, c)
    history = [B - C]
    for it in range(1, max_iter + 1):
        def step(i, rule=rule):
            return optimize_width(locs[i], rule, problem, c, b)
        new = list(pool.map(step, range(len(locs)))) if pool else [step(i) for i in range(len(locs))]
        rule2, B2, C2 = _evaluate(locs, masses, new, problem, c)
        history.append(B2 - C2)
        done = new == widths or abs(history[-1] - history[-2]) < tol
        widths, rule, B, C = new, rule2, B2, C2
        if done:
            return widths, rule, B, C, it, True, history
    return widths, rule, B, C, max_iter, False, history


def _polish(locs, masses, widths, problem, c, b, tol, scan=128, max_rounds=50):
    """Global line searches on the true net benefit (rule re-optimised at every
    trial point): coordinate directions, a coarse joint grid over each pair of
    widths, and the pair diagonals.

    Alternating ascent can stall where a width sits on a breakpoint that its own
    noise created; moving the width and the rule together escapes such points.
    """
    widths = list(widths)

    def value(ws):
        _, B, C = _evaluate(locs, masses, ws, problem, c)
        return B - C

    V = value(widths)
    for _ in range(max_rounds):
        moved = False
        if len(locs) <= PAIR_SCAN_MAX_STATES:
            grid = [0.0] + [b * k / PAIR_SCAN_POINTS for k in range(1, PAIR_SCAN_POINTS + 1)]
            for i, j in itertools.combinations(range(len(locs)), 2):
                for di, dj in itertools.product(grid, grid):
                    trial = list(widths)
                    trial[i], trial[j] = di, dj
                    v = value(trial)
                    if v > V + tol:
                        widths, V, moved = trial, v, True
        for i in range(len(locs)):
            def f(d, i=i):
                trial = list(widths)
                trial[i] = d
                return value(trial)
            # true V kinks where this support's edges meet another support's edges
            kinks = sorted({k for j in range(len(locs)) if j != i and widths[j] > 0
                            for k in (abs(locs[j] + widths[j] - locs[i]),
                                      abs(locs[j] - widths[j] - locs[i]))
                            if 0.0 < k < b})
            d, v = _maximise(f, kinks, b, 1e-10, scan // (len(kinks) + 1) + 2)
            if v > V + tol:
                widths[i], V, moved = d, v, True
        if len(locs) <= PAIR_SCAN_MAX_STATES:
            # ridges where two support edges coincide run along e_i +- e_j
            for i, j in itertools.combinations(range(len(locs)), 2):
                for sj in (1.0, -1.0):
                    t_lo = max(-widths[i], -widths[j] if sj > 0 else widths[j] - b)
                    t_hi = min(b - widths[i], b - widths[j] if sj > 0 else widths[j])
                    if t_hi - t_lo < 1e-12:
                        continue

                    def g(t, i=i, j=j, sj=sj):
                        trial = list(widths)
                        trial[i] = min(b, max(0.0, widths[i] + t))
                        trial[j] = min(b, max(0.0, widths[j] + sj * t))
                        return value(trial)
                    t, v = _line_max(g, t_lo, t_hi, scan)
                    if v > V + tol:
                        widths[i] = min(b, max(0.0, widths[i] + t))
                        widths[j] = min(b, max(0.0, widths[j] + sj * t))
                        V, moved = v, True
        if not moved:
            break
    return widths


def _line_max(g, lo, hi, scan):
    xs = [lo + (hi - lo) * k / scan for k in range(scan + 1)]
    ys = [g(x) for x in xs]
    k = max(range(len(xs)), key=lambda i: ys[i])
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, scan)]
    x, y = golden_section_max(g, a, b, 1e-10)
    return (x, y) if y > ys[k] else (xs[k], ys[k])


def solve(F: MixedDistribution, problem: DecisionProblem, c: NoiseCostFunction, b: float,
          tol: float = 1e-6, max_iter: int = 200, restarts: int = 8, seed: int = 0,
          threads: int = 1, foc_tol: float = 1e-5, nodes: int = 16) -> SolverResult:
    """Optimal uniform experiment by alternating ascent with seeded multistart.

    Each iteration recomputes the optimal rule for the current widths and then
    best-responds every state's width to that rule; the net benefit never
    decreases.  The best of ``restarts`` runs (first start: all widths ``b/2``)
    is kept and certified with :func:`verify_foc`.
    """
    if not b > 0:
        raise ValidationError("noise bound must be positive")
    G = discretize(F, nodes)
    locs = [float(x) for x in G.locations]
    masses = [float(m) for m in G.masses]
    rng = np.random.default_rng(seed)
    starts = [[0.5 * b] * len(locs)]
    starts += [list(rng.uniform(0.0, b, len(locs))) for _ in range(max(restarts, 1) - 1)]
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        best = None
        for start in starts:
            run = _ascend(locs, masses, start, problem, c, b, tol, max_iter, pool)
            # run = (widths, rule, B, C, ...); keep the earliest best
            if best is None or run[2] - run[3] > best[2] - best[3] + 1e-12:
                best = run
    finally:
        if pool:
            pool.shutdown()
    widths, rule, B, C, its, converged, history = best
    polished = _polish(locs, masses, widths, problem, c, b, tol)
    if polished != widths:
        run = _ascend(locs, masses, polished, problem, c, b, tol, max_iter, None)
        widths, rule, B, C = run[:4]
        its += run[4]
        converged = converged and run[5]
        history = history + run[6]
    if not converged:
        log.warning("solver stopped after %d iterations without converging", its)
    result = SolverResult(tuple(locs), tuple(masses), dict(zip(locs, widths)), rule,
                          B, C, B - C, b, its, converged, history)
    result.foc = verify_foc(result, problem, c, b, foc_tol).entries
    return result


@dataclass(frozen=True)
class FocReport:
    entries: dict

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries.values()), default=0.0)


def verify_foc(result: SolverResult, problem: DecisionProblem, c: NoiseCostFunction,
               b: float, tol: float = 1e-5, widths: Mapping[float, float] | None = None) -> FocReport:
    """Check the generalized first-order condition state by state.

    Interior widths need ``0`` within ``tol`` of the Clarke interval; widths at
    the bound need a left derivative ``>= -tol``; the perfect-signal branch
    needs a right derivative ``<= tol`` at zero.
    """
    widths = dict(result.widths if widths is None else widths)
    entries = {}
    for theta, delta in widths.items():
        obj = StateObjective(theta, result.rule, problem, c)
        if delta >= b - 1e-12:
            left, _ = obj.one_sided(delta)
            res = max(0.0, -left)
            entries[theta] = FocEntry("boundary", ClarkeInterval(min(left, _), max(left, _)),
                                      res, res <= tol)
        elif delta <= 0:
            # perfect signal: a downward jump at 0+ already makes it a local max
            jump = obj(0.0) - obj(1e-9)
            if jump > tol:
                res = 0.0
            elif jump < -tol:
                res = -jump
            else:
                res = max(0.0, one_sided_derivative(obj, 0.0, 1.0, 1e-3))
            entries[theta] = FocEntry("perfect", None, res, res <= tol)
        else:
            iv = clarke_subdiff(theta, result.rule, problem, c, delta)
            res = iv.distance(0.0)
            entries[theta] = FocEntry("interior", iv, res, res <= tol)
    return FocReport(entries)


def result_for_widths(F: MixedDistribution, problem: DecisionProblem, c: NoiseCostFunction,
                      b: float, widths: Mapping[float, float], foc_tol: float = 1e-5,
                      nodes: int = 16) -> SolverResult:
    """Score given per-state widths (0.0 for a perfect signal) with their
    optimal rule and attach the first-order check."""
    G = discretize(F, nodes)
    locs = [float(x) for x in G.locations]
    masses = [float(m) for m in G.masses]
    given = {float(k): float(v) for k, v in widths.items()}
    missing = [t for t in locs if t not in given]
    if missing:
        raise ValidationError(f"no width given for state(s) {missing}")
    ws = [given[t] for t in locs]
    if any(w < 0 or w > b for w in ws):
        raise ValidationError("widths must lie in [0, b]")
    rule, B, C = _evaluate(locs, masses, ws, problem, c)
    result = SolverResult(tuple(locs), tuple(masses), dict(zip(locs, ws)), rule, B, C, B - C,
                          b, 0, True, [B - C])
    result.foc = verify_foc(result, problem, c, b, foc_tol).entries
    return result
