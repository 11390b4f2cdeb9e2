"""Noise laws, signal functions and experiments.

An experiment assigns to every state a symmetric noise law centred at zero;
the observed signal is ``sigma(theta, x)`` with ``x`` drawn from that law.
Every noise kind here has a piecewise-linear density, which the Bayes module
exploits for exact evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (EmptyMassRegion, IncompatibleExperiments, InvalidDistribution,
                     UnassignedState, ValidationError, WidthExceedsBound)
from .measures import MASS_TOL, MixedDistribution, discretize


class NoiseDistribution:
    """Even noise law on the real line with a piecewise-linear density.

    Subclasses provide ``pdf``, ``half_cdf`` (mass on ``[0, t]``), ``radius``
    (support bound), ``knots`` (nonnegative kink points) and ``total_mass``.
    """

    total_mass: float = 1.0
    #: user-supplied primitives must be strictly unimodal; derived laws need not
    strict: bool = False
    #: garbles move mass outward and are not unimodal at all
    unimodal: bool = True

    def pdf(self, x):
        raise NotImplementedError

    def half_cdf(self, t):
        raise NotImplementedError

    @property
    def radius(self) -> float:
        raise NotImplementedError

    def knots(self) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.total_mass + np.sign(x) * self.half_cdf(np.abs(x))

    def mass(self, a, b):
        """Probability of the interval ``[a, b]``."""
        return self.cdf(b) - self.cdf(a)

    def signed_knots(self) -> np.ndarray:
        k = self.knots()
        return np.unique(np.concatenate([-k, k]))


@dataclass(frozen=True)
class Uniform(NoiseDistribution):
    """``H_delta``: uniform on ``[-width, width]``."""

    width: float

    def __post_init__(self):
        if not (self.width > 0 and math.isfinite(self.width)):
            raise InvalidDistribution(f"uniform width must be positive and finite, got {self.width!r}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.width, 0.5 / self.width, 0.0)

    def half_cdf(self, t):
        return 0.5 * np.clip(np.asarray(t, dtype=float), 0.0, self.width) / self.width

    @property
    def radius(self) -> float:
        return self.width

    def knots(self) -> np.ndarray:
        return np.array([0.0, self.width])


@dataclass(frozen=True)
class MixtureOfUniforms(NoiseDistribution):
    """``sum_j weights[j] * H_{widths[j]}``; ``residual_mass`` records the mass
    left unassigned by sub-probability approximations."""

    weights: tuple
    widths: tuple
    residual_mass: float = 0.0

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        d = tuple(float(v) for v in self.widths)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "widths", d)
        if len(w) != len(d) or not w:
            raise InvalidDistribution("mixture needs matching, nonempty weights and widths")
        if any(v < 0 for v in w) or self.residual_mass < 0:
            raise InvalidDistribution("mixture weights must be nonnegative")
        if any(not v > 0 for v in d):
            raise InvalidDistribution("mixture widths must be positive")
        if abs(math.fsum(w) + self.residual_mass - 1.0) > MASS_TOL:
            raise InvalidDistribution(
                f"mixture weights + residual mass must sum to 1 (got {math.fsum(w) + self.residual_mass:.12g})")

    @classmethod
    def sub_probability(cls, weights, widths) -> "MixtureOfUniforms":
        return cls(tuple(weights), tuple(widths), max(0.0, 1.0 - math.fsum(weights)))

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def pdf(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for w, d in zip(self.weights, self.widths):
            out = out + np.where(x <= d, 0.5 * w / d, 0.0)
        return out

    def half_cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w, d in zip(self.weights, self.widths):
            out = out + 0.5 * w * np.clip(t, 0.0, d) / d
        return out

    @property
    def radius(self) -> float:
        return max(d for w, d in zip(self.weights, self.widths) if w > 0) if self.total_mass > 0 else 0.0

    def knots(self) -> np.ndarray:
        return np.unique(np.array([0.0, *self.widths]))


@dataclass(frozen=True, eq=False)
class GriddedDensity(NoiseDistribution):
    """Even density given by samples on ``[0, xs[-1]]`` with linear
    interpolation; zero beyond the last sample."""

    xs: tuple
    values: tuple
    strict: bool = True
    _cum: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        vs = np.asarray(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2:
            raise InvalidDistribution("gridded density needs matching 1-D samples, >= 2 points")
        if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
            raise InvalidDistribution("gridded density abscissae must start at 0 and increase")
        if np.any(vs < 0):
            raise InvalidDistribution("density must be nonnegative")
        steps = np.diff(vs)
        if np.any(steps > 0):
            raise InvalidDistribution("density must be nonincreasing on [0, inf)")
        if self.strict and np.any((vs[:-1] > 0) & (steps >= 0)):
            raise InvalidDistribution("density must be strictly decreasing wherever positive")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vs[1:] + vs[:-1]) * np.diff(xs))])
        if abs(2.0 * cum[-1] - 1.0) > MASS_TOL:
            raise InvalidDistribution(f"noise density must integrate to 1 (got {2 * cum[-1]:.12g})")
        object.__setattr__(self, "xs", tuple(xs.tolist()))
        object.__setattr__(self, "values", tuple(vs.tolist()))
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def tent(cls, width: float) -> "GriddedDensity":
        """Triangular density ``(1 - |x|/width) / width`` on ``[-width, width]``."""
        return cls((0.0, float(width)), (1.0 / width, 0.0))

    @classmethod
    def from_function(cls, f: Callable, radius: float, n: int = 201,
                      strict: bool = True) -> "GriddedDensity":
        """Sample an even shape ``f`` on ``n`` points of ``[0, radius]`` and
        normalise the interpolant to unit mass."""
        xs = np.linspace(0.0, radius, n)
        vs = np.asarray([f(x) for x in xs], dtype=float)
        mass = 2.0 * np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(xs))
        return cls(tuple(xs), tuple(vs / mass), strict)

    def pdf(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        xs = np.asarray(self.xs)
        return np.where(x <= xs[-1], np.interp(x, xs, np.asarray(self.values)), 0.0)

    def half_cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.xs[-1])
        xs = np.asarray(self.xs)
        vs = np.asarray(self.values)
        i = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, len(xs) - 2)
        h = t - xs[i]
        slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])
        return self._cum[i] + vs[i] * h + 0.5 * slope * h * h

    @property
    def radius(self) -> float:
        vs = self.values
        last = len(vs) - 1
        while last > 0 and vs[last] == 0.0 and vs[last - 1] == 0.0:
            last -= 1
        return self.xs[last]

    def knots(self) -> np.ndarray:
        return np.asarray(self.xs)


@dataclass(frozen=True)
class RestrictedKernelSpec:
    """Kernel that moves a share ``alpha`` of the mass on ``(x0, xhat)`` uniformly
    onto ``[xhat, x1)`` (mirrored on the negative half-axis)."""

    x0: float
    xhat: float
    x1: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.xhat < self.x1):
            raise ValidationError(
                f"restricted kernel needs 0 <= x0 < xhat < x1, got ({self.x0}, {self.xhat}, {self.x1})")
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")


def is_restricted_kernel_consistent(spec: RestrictedKernelSpec) -> bool:
    """True iff every target point lies weakly farther from zero than every
    source point, i.e. the kernel never puts mass inside ``[-d, d]`` for a
    source outside it."""
    return 0.0 <= spec.x0 <= spec.xhat < spec.x1


@dataclass(frozen=True)
class Garbled(NoiseDistribution):
    """Result of :func:`restricted_garble`."""

    base: NoiseDistribution
    spec: RestrictedKernelSpec
    unimodal = False

    @property
    def moved_mass(self) -> float:
        """Mass moved per half-axis."""
        s = self.spec
        return s.alpha * float(self.base.half_cdf(s.xhat) - self.base.half_cdf(s.x0))

    @property
    def total_mass(self) -> float:
        return self.base.total_mass

    def pdf(self, x):
        s = self.spec
        a = np.abs(np.asarray(x, dtype=float))
        p = self.base.pdf(a)
        src = (a > s.x0) & (a < s.xhat)
        dst = (a >= s.xhat) & (a < s.x1)
        return p * np.where(src, 1.0 - s.alpha, 1.0) + np.where(dst, self.moved_mass / (s.x1 - s.xhat), 0.0)

    def half_cdf(self, t):
        s = self.spec
        t = np.asarray(t, dtype=float)
        base = self.base.half_cdf
        lost = s.alpha * (base(np.clip(t, s.x0, s.xhat)) - base(s.x0))
        gained = self.moved_mass * np.clip((t - s.xhat) / (s.x1 - s.xhat), 0.0, 1.0)
        return base(t) - lost + gained

    @property
    def radius(self) -> float:
        return max(self.base.radius, self.spec.x1)

    def knots(self) -> np.ndarray:
        s = self.spec
        return np.unique(np.concatenate([self.base.knots(), [s.x0, s.xhat, s.x1]]))


@dataclass(frozen=True)
class Mixture(NoiseDistribution):
    """Finite mixture of arbitrary noise laws."""

    components: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise InvalidDistribution("mixture needs matching, nonempty components and weights")
        if any(w < 0 for w in self.weights):
            raise InvalidDistribution("mixture weights must be nonnegative")
        if abs(math.fsum(self.weights) - 1.0) > MASS_TOL:
            raise InvalidDistribution("mixture weights must sum to 1")

    @property
    def unimodal(self) -> bool:
        return all(c.unimodal for c in self.components)

    @property
    def total_mass(self) -> float:
        return math.fsum(w * c.total_mass for w, c in zip(self.weights, self.components))

    def pdf(self, x):
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components))

    def half_cdf(self, t):
        return sum(w * c.half_cdf(t) for w, c in zip(self.weights, self.components))

    @property
    def radius(self) -> float:
        return max(c.radius for w, c in zip(self.weights, self.components) if w > 0)

    def knots(self) -> np.ndarray:
        return np.unique(np.concatenate([c.knots() for c in self.components]))


def admissibility_issues(noise: NoiseDistribution, n: int = 2001) -> list[str]:
    """Check evenness and (weak or strict) unimodality on a validation grid.

    Returns a list of human-readable problems; empty means admissible.
    """
    r = noise.radius
    xs = np.unique(np.concatenate([np.linspace(0.0, 1.05 * r, n), noise.knots()]))
    # knots within rounding of a grid point would show up as flat steps
    xs = xs[np.concatenate([[True], np.diff(xs) > 1e-9 * max(r, 1.0)])]
    issues = []
    p = noise.pdf(xs)
    if np.any(noise.pdf(-xs) != p):
        issues.append("density is not even")
    if np.any(p < 0):
        issues.append("density is negative")
    if noise.unimodal:
        steps = np.diff(p)
        if np.any(steps > 1e-12 * max(1.0, float(p.max()))):
            issues.append("density increases on [0, inf)")
        if noise.strict and np.any((p[:-1] > 0) & (steps >= 0)):
            issues.append("density is not strictly decreasing where positive")
    return issues


@dataclass(frozen=True)
class SignalFunction:
    """``sigma(theta, x)``; additive unless ``forward``/``inverse`` are given.

    For custom signals ``inverse(theta, s)`` must return the noise ``x`` with
    ``sigma(theta, x) = s``.
    """

    kind: str = "additive"
    forward: Callable | None = None
    inverse: Callable | None = None

    def __post_init__(self):
        if self.kind == "additive":
            return
        if self.kind != "custom" or self.forward is None or self.inverse is None:
            raise ValidationError("custom signal needs forward and inverse callables")
        grid = np.linspace(-3.0, 3.0, 13)
        for th in grid:
            vals = np.array([self.forward(th, x) for x in grid])
            if np.any(np.diff(vals) <= 0):
                raise ValidationError("signal must be strictly increasing in the noise")
            back = np.array([self.forward(th, self.inverse(th, s)) for s in vals])
            if np.max(np.abs(back - vals)) > 1e-10:
                raise ValidationError("signal inverse does not round-trip")

    @classmethod
    def additive(cls) -> "SignalFunction":
        return cls("additive")

    @property
    def is_additive(self) -> bool:
        return self.kind == "additive"

    def __call__(self, theta, x):
        if self.is_additive:
            return np.asarray(theta) + np.asarray(x)
        return self.forward(theta, x)

    def noise_for(self, theta, s):
        if self.is_additive:
            return np.asarray(s) - np.asarray(theta)
        return self.inverse(theta, s)

    def jacobian(self, theta, s, h: float = 1e-6):
        """``d inverse / ds`` so noise densities become signal densities."""
        if self.is_additive:
            return 1.0
        return (self.inverse(theta, s + h) - self.inverse(theta, s - h)) / (2 * h)


@dataclass(frozen=True, eq=False)
class Experiment:
    """State-indexed noise laws with a common signal function and noise bound.

    ``assignment`` maps atom locations to noise laws; ``default`` covers states
    of a continuous prior (and any unlisted state).
    """

    assignment: Mapping[float, NoiseDistribution]
    signal: SignalFunction = field(default_factory=SignalFunction)
    bound: float = math.inf
    default: NoiseDistribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "assignment",
                           {float(k): v for k, v in sorted(self.assignment.items())})
        if not self.bound > 0:
            raise ValidationError("noise bound must be positive")
        laws = list(self.assignment.values()) + ([self.default] if self.default else [])
        for theta, law in list(self.assignment.items()) + [("default", self.default)]:
            if law is None:
                continue
            if not law.radius < self.bound:
                raise WidthExceedsBound(
                    f"noise support {law.radius:.12g} at state {theta} is not below bound {self.bound:.12g}")
            issues = admissibility_issues(law)
            if issues:
                raise InvalidDistribution(f"noise at state {theta}: {'; '.join(issues)}")
        if not laws:
            raise ValidationError("experiment assigns no noise law")

    def noise_for(self, theta: float) -> NoiseDistribution:
        law = self.assignment.get(float(theta))
        if law is not None:
            return law
        if self.default is not None:
            return self.default
        raise UnassignedState(f"no noise law assigned to state {theta!r}")

    @property
    def is_uniform(self) -> bool:
        laws = list(self.assignment.values()) + ([self.default] if self.default else [])
        return all(isinstance(v, Uniform) for v in laws)

    def widths(self) -> dict[float, float]:
        return {k: v.width for k, v in self.assignment.items() if isinstance(v, Uniform)}


def make_uniform_experiment(widths: Mapping[float, float],
                            signal: SignalFunction | None = None,
                            bound: float = math.inf) -> Experiment:
    """Uniform experiment ``theta -> H_{widths[theta]}``."""
    for theta, w in widths.items():
        if not w < bound:
            raise WidthExceedsBound(f"width {w!r} at state {theta!r} is not below bound {bound!r}")
    return Experiment({k: Uniform(float(w)) for k, w in widths.items()},
                      signal or SignalFunction(), bound)


def _mix_laws(laws: Sequence[NoiseDistribution], weights: Sequence[float]) -> NoiseDistribution:
    pairs = [(law, w) for law, w in zip(laws, weights) if w > 0]
    if len({id(law) for law, _ in pairs}) == 1 or all(law == pairs[0][0] for law, _ in pairs):
        return pairs[0][0]
    if all(isinstance(law, Uniform) for law, _ in pairs):
        acc: dict[float, float] = {}
        for law, w in pairs:
            acc[law.width] = acc.get(law.width, 0.0) + w
        widths = sorted(acc)
        weights_ = [acc[d] for d in widths]
        total = math.fsum(weights_)
        return MixtureOfUniforms(tuple(w / total for w in weights_), tuple(widths))
    total = math.fsum(w for _, w in pairs)
    return Mixture(tuple(law for law, _ in pairs), tuple(w / total for _, w in pairs))


def average_experiment(P: Experiment, F: MixedDistribution) -> NoiseDistribution:
    """State-invariant averaged law ``P^F = ∫ P_theta dF(theta)``.

    Continuous priors are first discretised at Gauss-Legendre nodes.
    """
    G = discretize(F)
    laws = [P.noise_for(loc) for loc, _ in G.atoms]
    return _mix_laws(laws, [m for _, m in G.atoms])


def mix_experiments(P: Experiment, Q: Experiment, alpha: float) -> Experiment:
    """Per-state mixture ``alpha * P_theta + (1 - alpha) * Q_theta``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    if P.signal != Q.signal or P.bound != Q.bound:
        raise IncompatibleExperiments("experiments differ in signal function or bound")
    if set(P.assignment) != set(Q.assignment) or (P.default is None) != (Q.default is None):
        raise IncompatibleExperiments("experiments assign noise to different states")
    mixed = {k: _mix_laws((P.assignment[k], Q.assignment[k]), (alpha, 1.0 - alpha))
             for k in P.assignment}
    default = None
    if P.default is not None:
        default = _mix_laws((P.default, Q.default), (alpha, 1.0 - alpha))
    return Experiment(mixed, P.signal, P.bound, default)


def restricted_garble(P: NoiseDistribution, spec: RestrictedKernelSpec) -> Garbled:
    """Move a share ``alpha`` of the mass on ``±(x0, xhat)`` uniformly onto
    ``±[xhat, x1)``; the result is less informative in the restricted order."""
    moved = float(P.half_cdf(spec.xhat) - P.half_cdf(spec.x0))
    if not moved > 0:
        raise EmptyMassRegion(
            f"no noise mass on ({spec.x0:.6g}, {spec.xhat:.6g}) to redistribute")
    return Garbled(P, spec)
