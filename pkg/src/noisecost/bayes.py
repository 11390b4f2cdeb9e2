"""Signal marginals, posteriors, interim-optimal decision rules and the gross
benefit ``B_F(P)``.

For atomic priors and additive signals every quantity is computed exactly:
all noise laws in :mod:`noisecost.experiments` have piecewise-linear
densities, so between consecutive signal knots the posterior-weighted score
of each action is a straight line and the upper envelope can be integrated in
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError, ZeroMarginal
from .costs import experiment_cost
from .experiments import Experiment, NoiseDistribution, Uniform
from .measures import (DEFAULT_QUADRATURE, Density, MixedDistribution, Quadrature,
                       discretize, integrate)

TIE_RTOL = 1e-12
UTILITY_KINDS = ("quadratic-loss", "trade", "table", "callable")


@dataclass(frozen=True, eq=False)
class Utility:
    """``u(theta, a)``, vectorised over numpy arrays.

    ``quadratic-loss``: ``-scale * (theta - a)**2``; ``trade``: ``a * (theta - price)``
    (``a`` = 1 buys); ``table``: explicit values for listed states and actions.
    """

    kind: str
    params: dict = field(default_factory=dict)
    fn: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in UTILITY_KINDS:
            raise ValidationError(f"unknown utility kind {self.kind!r}")
        if self.kind == "table":
            states = [float(s) for s in self.params["states"]]
            actions = [float(a) for a in self.params["actions"]]
            values = np.asarray(self.params["values"], dtype=float)
            if values.shape != (len(states), len(actions)):
                raise ValidationError("utility table must be states x actions")
            lookup = {(s, a): values[i, j] for i, s in enumerate(states)
                      for j, a in enumerate(actions)}
            object.__setattr__(self, "_lookup", lookup)
        if self.kind == "callable" and self.fn is None:
            raise ValidationError("callable utility needs fn")

    @classmethod
    def quadratic_loss(cls, scale: float = 1.0) -> "Utility":
        return cls("quadratic-loss", {"scale": float(scale)})

    @classmethod
    def trade(cls, price: float) -> "Utility":
        return cls("trade", {"price": float(price)})

    @classmethod
    def table(cls, states, actions, values) -> "Utility":
        return cls("table", {"states": list(states), "actions": list(actions),
                             "values": [list(r) for r in values]})

    @classmethod
    def from_callable(cls, fn: Callable) -> "Utility":
        return cls("callable", {}, fn)

    def __call__(self, theta, a):
        if self.kind == "quadratic-loss":
            return -self.params["scale"] * (np.asarray(theta) - np.asarray(a)) ** 2
        if self.kind == "trade":
            return np.asarray(a) * (np.asarray(theta) - self.params["price"])
        if self.kind == "table":
            def one(t, b):
                try:
                    return self._lookup[(float(t), float(b))]
                except KeyError:
                    raise ValidationError(f"utility table has no entry for ({t}, {b})") from None
            return np.vectorize(one, otypes=[float])(theta, a)
        return np.vectorize(self.fn, otypes=[float])(theta, a)


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    actions: tuple
    utility: Utility

    def __post_init__(self):
        acts = tuple(float(a) for a in self.actions)
        if not acts:
            raise ValidationError("action set must be nonempty")
        if any(b <= a for a, b in zip(acts, acts[1:])):
            raise ValidationError("actions must be strictly sorted")
        object.__setattr__(self, "actions", acts)

    def matrix(self, states) -> np.ndarray:
        """``U[i, j] = u(states[i], actions[j])``."""
        st = np.asarray(states, dtype=float)[:, None]
        U = np.asarray(self.utility(st, np.asarray(self.actions)[None, :]), dtype=float)
        U = np.broadcast_to(U, (st.shape[0], len(self.actions)))
        if not np.all(np.isfinite(U)):
            raise ValidationError("utility is not finite on the states x actions grid")
        return U


def best_index(scores) -> int:
    """Argmax with ties (within a relative 1e-12) resolved to the smallest action."""
    scores = np.asarray(scores, dtype=float)
    top = scores.max()
    slack = TIE_RTOL * np.abs(scores).max()
    return int(np.flatnonzero(scores >= top - slack)[0])


@dataclass(frozen=True)
class DecisionRule:
    """Piecewise-constant map from signals to actions.

    ``actions[k]`` holds on the open piece left of ``breakpoints[k]`` (the last
    entry on the piece right of the final breakpoint); ``at_breakpoints[k]`` is
    the action taken exactly at ``breakpoints[k]``.
    """

    breakpoints: tuple
    actions: tuple
    at_breakpoints: tuple

    def __post_init__(self):
        for name in ("breakpoints", "actions", "at_breakpoints"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.actions) != len(self.breakpoints) + 1:
            raise ValidationError("decision rule needs one action per piece")
        if len(self.at_breakpoints) != len(self.breakpoints):
            raise ValidationError("decision rule needs one action per breakpoint")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValidationError("decision rule breakpoints must be sorted")

    @classmethod
    def constant(cls, action: float) -> "DecisionRule":
        return cls((), (float(action),), ())

    def __call__(self, s):
        bp = np.asarray(self.breakpoints, dtype=float)
        s_arr = np.asarray(s, dtype=float)
        acts = np.asarray(self.actions)
        if bp.size == 0:
            return np.full(s_arr.shape, acts[0]) if s_arr.ndim else float(acts[0])
        i = np.searchsorted(bp, s_arr, side="left")
        on = (i < bp.size) & (bp[np.minimum(i, bp.size - 1)] == s_arr)
        out = np.where(on, np.asarray(self.at_breakpoints)[np.minimum(i, bp.size - 1)], acts[i])
        return out if s_arr.ndim else float(out)

    def right_of(self, s) -> float:
        """Action on the piece immediately to the right of ``s``."""
        return self.actions[int(np.searchsorted(self.breakpoints, s, side="right"))]

    def left_of(self, s) -> float:
        return self.actions[int(np.searchsorted(self.breakpoints, s, side="left"))]

    def pieces(self):
        """``(lo, hi, action)`` triples covering the real line."""
        edges = (-math.inf, *self.breakpoints, math.inf)
        return [(edges[k], edges[k + 1], a) for k, a in enumerate(self.actions)]


@dataclass(frozen=True)
class PosteriorAtSignal:
    distribution: MixedDistribution
    marginal: float


# ---------------------------------------------------------------------------
# Exact piecewise path (atomic prior, additive signal)
# ---------------------------------------------------------------------------

def exact_rule(locs: Sequence[float], masses: Sequence[float],
               laws: Sequence[NoiseDistribution | None],
               problem: DecisionProblem) -> tuple[DecisionRule, float]:
    """Optimal rule and gross benefit for an atomic prior under additive noise.

    ``laws[i] is None`` marks a perfectly revealing state (zero noise): its
    signal is an atom at ``locs[i]`` and it always gets its full-information
    action.
    """
    locs = np.asarray(locs, dtype=float)
    masses = np.asarray(masses, dtype=float)
    U = problem.matrix(locs)
    acts = np.asarray(problem.actions)
    noisy = [i for i, law in enumerate(laws) if law is not None]
    perfect = [i for i, law in enumerate(laws) if law is None]

    benefit = math.fsum(masses[i] * U[i, best_index(U[i])] for i in perfect)
    point_action = {float(locs[i]): float(acts[best_index(U[i])]) for i in perfect}

    segments: list[list] = []
    if noisy:
        cuts = np.unique(np.concatenate([locs[i] + laws[i].signed_knots() for i in noisy]))
        lo, hi = cuts[:-1], cuts[1:]
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        t1 = lo + 0.25 * (hi - lo)
        t2 = lo + 0.75 * (hi - lo)
        w1 = np.array([masses[i] * laws[i].pdf(t1 - locs[i]) for i in noisy])
        w2 = np.array([masses[i] * laws[i].pdf(t2 - locs[i]) for i in noisy])
        Un = U[noisy]
        S1 = Un.T @ w1
        S2 = Un.T @ w2
        supported = (w1.sum(axis=0) > 0) | (w2.sum(axis=0) > 0)
        pieces_benefit = []
        for k in np.flatnonzero(supported):
            a1, a2 = S1[:, k], S2[:, k]
            l, r, ta, tb = lo[k], hi[k], t1[k], t2[k]
            d1 = a1[:, None] - a1[None, :]
            d2 = a2[:, None] - a2[None, :]
            cross = d1 * d2 < 0
            sub = [l, r]
            if cross.any():
                ii, jj = np.nonzero(np.triu(cross))
                frac = d1[ii, jj] / (d1[ii, jj] - d2[ii, jj])
                ts = ta + (tb - ta) * frac
                sub = sorted({l, r, *(float(t) for t in ts if l < t < r)})
            for sl, sr in zip(sub[:-1], sub[1:]):
                mid = 0.5 * (sl + sr)
                g = a1 + (a2 - a1) * (mid - ta) / (tb - ta)
                j = best_index(g)
                pieces_benefit.append((sr - sl) * g[j])
                if segments and segments[-1][1] == sl and segments[-1][2] == acts[j]:
                    segments[-1][1] = sr
                else:
                    segments.append([sl, sr, float(acts[j])])
        benefit += math.fsum(pieces_benefit)

    # perfect states outside every noisy support act as zero-length segments
    anchors = [list(s) for s in segments]
    for theta, a in point_action.items():
        if not any(s[0] <= theta <= s[1] for s in segments):
            anchors.append([theta, theta, a])
    anchors.sort(key=lambda s: (s[0], s[1]))
    if not anchors:
        return DecisionRule.constant(float(acts[0])), benefit

    # fill unsupported gaps by the nearest supported piece (split at midpoints)
    filled: list[list] = []
    for seg in anchors:
        if filled and seg[0] > filled[-1][1]:
            mid = 0.5 * (filled[-1][1] + seg[0])
            filled[-1][1] = mid
            seg = [mid, seg[1], seg[2]]
        if filled and filled[-1][2] == seg[2]:
            filled[-1][1] = max(filled[-1][1], seg[1])
        else:
            filled.append(list(seg))
    breakpoints = [s[1] for s in filled[:-1]]
    actions = [s[2] for s in filled]

    def action_at(s):
        if s in point_action:
            return point_action[s]
        if not noisy:
            return None
        w = np.array([masses[i] * float(laws[i].pdf(s - locs[i])) for i in noisy])
        if w.sum() <= 0:
            return None
        return float(acts[best_index(U[noisy].T @ w)])

    at_bp = []
    for k, b in enumerate(breakpoints):
        a = action_at(b)
        at_bp.append(actions[k] if a is None else a)
    # interior perfect-state points that need an override
    extra = [(t, a) for t, a in point_action.items() if t not in breakpoints]
    rule = DecisionRule(tuple(breakpoints), tuple(actions), tuple(at_bp))
    for t, a in extra:
        if rule(t) != a:
            rule = _insert_point(rule, t, a)
    return rule, benefit


def _insert_point(rule: DecisionRule, s: float, action: float) -> DecisionRule:
    k = int(np.searchsorted(rule.breakpoints, s))
    surrounding = rule.actions[k]
    return DecisionRule(rule.breakpoints[:k] + (s,) + rule.breakpoints[k:],
                        rule.actions[:k] + (surrounding,) + rule.actions[k:],
                        rule.at_breakpoints[:k] + (action,) + rule.at_breakpoints[k:])


def uniform_rule(locs, masses, widths, problem: DecisionProblem) -> tuple[DecisionRule, float]:
    """:func:`exact_rule` for uniform noise; a width of 0 means perfect revelation."""
    laws = [Uniform(float(w)) if w > 0 else None for w in widths]
    return exact_rule(locs, masses, laws, problem)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def _atom_weights(F: MixedDistribution, P: Experiment, s: float) -> np.ndarray:
    out = []
    for loc, m in F.atoms:
        law = P.noise_for(loc)
        x = P.signal.noise_for(loc, s)
        out.append(m * float(law.pdf(x)) * float(P.signal.jacobian(loc, s)))
    return np.asarray(out)


def _equal_likelihoods(F: MixedDistribution, P: Experiment, s: float) -> bool:
    lik = [float(P.noise_for(loc).pdf(P.signal.noise_for(loc, s)))
           * float(P.signal.jacobian(loc, s)) for loc in F.locations]
    return all(v == lik[0] for v in lik)


def _continuous_integrand(F: MixedDistribution, P: Experiment, s: float):
    d = F.density
    sig = P.signal

    def integrand(theta):
        law = P.noise_for(theta)
        return float(d.pdf(theta)) * float(law.pdf(sig.noise_for(theta, s))) * float(sig.jacobian(theta, s))

    cuts = []
    if sig.is_additive and P.default is not None:
        cuts = list(s - P.default.signed_knots())
    return integrand, cuts


def signal_marginal(F: MixedDistribution, P: Experiment, s: float,
                    q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Density of the signal at ``s``."""
    total = math.fsum(_atom_weights(F, P, s))
    if not F.is_atomic:
        integrand, cuts = _continuous_integrand(F, P, s)
        total += q.integrate(integrand, F.density.lo, F.density.hi, cuts)
    return total


def posterior(F: MixedDistribution, P: Experiment, s: float,
              q: Quadrature = DEFAULT_QUADRATURE) -> PosteriorAtSignal:
    """Posterior over states after observing ``s``."""
    w = _atom_weights(F, P, s)
    cont = 0.0
    if not F.is_atomic:
        integrand, cuts = _continuous_integrand(F, P, s)
        cont = q.integrate(integrand, F.density.lo, F.density.hi, cuts)
    marginal = math.fsum(w) + cont
    if not marginal > 0:
        raise ZeroMarginal(f"signal {s!r} lies outside the support of the signal law")
    if cont == 0 and F.is_atomic and _equal_likelihoods(F, P, s):
        # an uninformative signal leaves the prior untouched, bit for bit
        return PosteriorAtSignal(F, marginal)
    top = w.max() if w.size and w.max() > 0 else 1.0
    scaled = w / top
    norm = marginal / top
    atoms = tuple((loc, float(v / norm)) for (loc, _), v in zip(F.atoms, scaled)
                  if v / norm >= 1e-12)
    density = None
    if cont > 0:
        d = F.density
        integrand, cuts = _continuous_integrand(F, P, s)
        density = Density.from_function(
            lambda t: np.vectorize(integrand, otypes=[float])(t) / marginal,
            d.lo, d.hi, cont / marginal, list(d.knots) + cuts)
    return PosteriorAtSignal(MixedDistribution(atoms, density), marginal)


def optimal_decision(F: MixedDistribution, P: Experiment, s: float,
                     problem: DecisionProblem, q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Action maximising posterior expected utility at ``s`` (smallest on ties)."""
    post = posterior(F, P, s, q).distribution
    eu = [integrate(post, lambda t, a=a: problem.utility(t, a), q) for a in problem.actions]
    return problem.actions[best_index(eu)]


def _grid_rule(G: MixedDistribution, P: Experiment, problem: DecisionProblem,
               signal_grid: Sequence[float]) -> DecisionRule:
    grid = np.unique(np.asarray(signal_grid, dtype=float))
    U = problem.matrix(G.locations)
    acts = problem.actions
    segments = []
    for l, r in zip(grid[:-1], grid[1:]):
        w = _atom_weights(G, P, 0.5 * (l + r))
        if w.sum() <= 0:
            continue
        a = acts[best_index(U.T @ w)]
        if segments and segments[-1][2] == a and segments[-1][1] == l:
            segments[-1][1] = r
        else:
            segments.append([l, r, a])
    if not segments:
        raise ZeroMarginal("signal grid misses the support of the signal law")
    filled = []
    for seg in segments:
        if filled and seg[0] > filled[-1][1]:
            mid = 0.5 * (filled[-1][1] + seg[0])
            filled[-1][1] = mid
            seg = [mid, seg[1], seg[2]]
        if filled and filled[-1][2] == seg[2]:
            filled[-1][1] = seg[1]
        else:
            filled.append(seg)
    bps = tuple(s[1] for s in filled[:-1])
    actions = tuple(s[2] for s in filled)
    return DecisionRule(bps, actions, actions[1:])


def decision_rule(F: MixedDistribution, P: Experiment, problem: DecisionProblem,
                  signal_grid: Sequence[float] | None = None, nodes: int = 16) -> DecisionRule:
    """Interim-optimal decision rule.

    Additive signals use the exact piecewise path (continuous priors are first
    discretised at ``nodes`` Gauss-Legendre points per piece); other signals
    need ``signal_grid`` and pick the optimal action on each grid cell.
    """
    G = discretize(F, nodes)
    if P.signal.is_additive and signal_grid is None:
        laws = [P.noise_for(loc) for loc in G.locations]
        return exact_rule(G.locations, G.masses, laws, problem)[0]
    if signal_grid is None:
        raise ValidationError("non-additive signals need a signal grid")
    return _grid_rule(G, P, problem, signal_grid)


def expected_utility(F: MixedDistribution, P: Experiment, rule: DecisionRule,
                     problem: DecisionProblem, nodes: int = 16) -> float:
    """``E_{theta, x} u(theta, rule(sigma(theta, x)))`` for any piecewise rule."""
    G = discretize(F, nodes)
    U = problem.matrix(G.locations)
    index = {a: j for j, a in enumerate(problem.actions)}
    total = []
    for i, (loc, m) in enumerate(G.atoms):
        law = P.noise_for(loc)
        for lo, hi, a in rule.pieces():
            xlo = -math.inf if lo == -math.inf else float(P.signal.noise_for(loc, lo))
            xhi = math.inf if hi == math.inf else float(P.signal.noise_for(loc, hi))
            p = float(law.mass(max(xlo, -1e300), min(xhi, 1e300)))
            if p > 0:
                total.append(m * p * U[i, index[a]])
    return math.fsum(total)


def gross_benefit(F: MixedDistribution, P: Experiment, problem: DecisionProblem,
                  q: Quadrature = DEFAULT_QUADRATURE, signal_grid=None, nodes: int = 16) -> float:
    """Expected utility under the interim-optimal rule."""
    G = discretize(F, nodes)
    if P.signal.is_additive and signal_grid is None:
        laws = [P.noise_for(loc) for loc in G.locations]
        return exact_rule(G.locations, G.masses, laws, problem)[1]
    rule = decision_rule(G, P, problem, signal_grid)
    return expected_utility(G, P, rule, problem)


def net_benefit(F: MixedDistribution, P: Experiment, problem: DecisionProblem, c,
                q: Quadrature = DEFAULT_QUADRATURE, signal_grid=None) -> tuple[float, float, float]:
    """``(B, C, V)`` with ``V = B - C``."""
    B = gross_benefit(F, P, problem, q, signal_grid)
    C = experiment_cost(c, P, F, q)
    return B, C, B - C
