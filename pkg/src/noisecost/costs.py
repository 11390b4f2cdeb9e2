"""Noise-cost functions ``c(x)`` and the expected-cost functional

    C_F(P) = ∫ ( ∫ c(x) dP_theta(x) ) dF(theta).

Uniform noise is costed in closed form through the antiderivative of ``c``;
everything else goes through quadrature split at the density and cost kinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidCost
from .experiments import Experiment, MixtureOfUniforms, NoiseDistribution, Uniform
from .measures import DEFAULT_QUADRATURE, MixedDistribution, Quadrature, integrate

COST_KINDS = ("exp-decay", "tent", "cauchy", "grid")


@dataclass(frozen=True)
class UnimodalityReport:
    violations: list = field(default_factory=list)
    at_infimum: list = field(default_factory=list)
    uneven: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.uneven


@dataclass(frozen=True, eq=False)
class NoiseCostFunction:
    """Even, bounded, strictly zero-unimodal cost of noise realisations.

    Use the constructors :meth:`exp_decay`, :meth:`tent`, :meth:`cauchy` and
    :meth:`grid`.
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise InvalidCost(f"unknown cost kind {self.kind!r}")
        if self.kind == "grid":
            xs = np.asarray(self.params["xs"], dtype=float)
            vs = np.asarray(self.params["values"], dtype=float)
            if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2:
                raise InvalidCost("grid cost needs matching 1-D xs/values, >= 2 points")
            if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
                raise InvalidCost("grid cost abscissae must start at 0 and increase")
            if np.any(vs < 0) or not np.all(np.isfinite(vs)):
                raise InvalidCost("grid cost values must be finite and nonnegative")
            seg = 0.5 * (vs[1:] + vs[:-1]) * np.diff(xs)
            object.__setattr__(self, "_xs", xs)
            object.__setattr__(self, "_vs", vs)
            object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))
        else:
            for k, v in self.params.items():
                if not (v > 0 and math.isfinite(v)):
                    raise InvalidCost(f"{self.kind} parameter {k} must be positive, got {v!r}")

    @classmethod
    def exp_decay(cls, scale: float = 1.0, rate: float = 1.0) -> "NoiseCostFunction":
        return cls("exp-decay", {"scale": float(scale), "rate": float(rate)})

    @classmethod
    def tent(cls, height: float = 1.0, halfwidth: float = 1.0) -> "NoiseCostFunction":
        return cls("tent", {"height": float(height), "halfwidth": float(halfwidth)})

    @classmethod
    def cauchy(cls, scale: float = 1.0) -> "NoiseCostFunction":
        return cls("cauchy", {"scale": float(scale)})

    @classmethod
    def grid(cls, xs: Sequence[float], values: Sequence[float],
             validate: bool = True) -> "NoiseCostFunction":
        """Piecewise-linear cost through samples on ``[0, xs[-1]]``, extended
        evenly and held constant beyond the last sample."""
        c = cls("grid", {"xs": [float(x) for x in xs], "values": [float(v) for v in values]})
        if validate:
            pts = np.asarray(c.params["xs"])
            report = check_unimodal(c, np.concatenate([-pts[::-1], pts[1:]]))
            if not report.ok:
                raise InvalidCost(f"cost is not strictly unimodal at zero: {report.violations}")
        return c

    def scaled(self, factor: float) -> "NoiseCostFunction":
        if self.kind == "grid":
            return NoiseCostFunction.grid(self.params["xs"],
                                          [factor * v for v in self.params["values"]])
        p = dict(self.params)
        key = "height" if self.kind == "tent" else "scale"
        p[key] = p[key] * factor
        return NoiseCostFunction(self.kind, p)

    def __call__(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        p = self.params
        if self.kind == "exp-decay":
            return p["scale"] * np.exp(-p["rate"] * a)
        if self.kind == "tent":
            return p["height"] * np.maximum(0.0, 1.0 - a / p["halfwidth"])
        if self.kind == "cauchy":
            return p["scale"] / (1.0 + a * a)
        return np.interp(a, self._xs, self._vs)

    def antiderivative(self, t):
        """``∫_0^t c(x) dx`` for ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "exp-decay":
            return p["scale"] * -np.expm1(-p["rate"] * t) / p["rate"]
        if self.kind == "tent":
            w = p["halfwidth"]
            s = np.minimum(t, w)
            return p["height"] * (s - 0.5 * s * s / w)
        if self.kind == "cauchy":
            return p["scale"] * np.arctan(t)
        xs, vs = self._xs, self._vs
        inside = np.minimum(t, xs[-1])
        i = np.clip(np.searchsorted(xs, inside, side="right") - 1, 0, len(xs) - 2)
        h = inside - xs[i]
        slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])
        return self._cum[i] + vs[i] * h + 0.5 * slope * h * h + vs[-1] * np.maximum(t - xs[-1], 0.0)

    def average(self, delta):
        """Mean of ``c`` over ``[-delta, delta]``; ``c(0)`` at ``delta = 0``."""
        d = np.asarray(delta, dtype=float)
        safe = np.where(d > 0, d, 1.0)
        return np.where(d > 0, self.antiderivative(safe) / safe, self(0.0))

    def kinks(self) -> np.ndarray:
        """Points of ``(0, inf)`` where ``c`` is not smooth."""
        if self.kind == "tent":
            return np.array([self.params["halfwidth"]])
        if self.kind == "grid":
            return self._xs[1:]
        return np.array([])

    @property
    def infimum(self) -> float:
        if self.kind == "grid":
            return float(self._vs.min())
        return 0.0

    @property
    def peak(self) -> float:
        return float(self(0.0))


def check_unimodal(c: NoiseCostFunction, grid: Sequence[float]) -> UnimodalityReport:
    """Scan a symmetric sorted grid for breaches of evenness and strict decrease
    on the positive half-axis.

    A non-decreasing pair is tolerated only on a tail where ``c`` already sits
    at its infimum after falling from a higher peak; such pairs are listed in
    ``at_infimum``.
    """
    g = np.asarray(grid, dtype=float)
    uneven = [float(x) for x in g if c(x) != c(-x)]
    pos = np.unique(np.abs(g))
    # mirrored grid points that differ only by roundoff count once
    if pos.size:
        pos = pos[np.concatenate([[True], np.diff(pos) > 1e-9 * max(float(pos[-1]), 1.0)])]
    vals = c(pos)
    inf, peak = c.infimum, c.peak
    violations, flat = [], []
    for (x0, v0), (x1, v1) in zip(zip(pos, vals), zip(pos[1:], vals[1:])):
        if v1 < v0:
            continue
        if v0 <= inf and peak > inf:
            flat.append((float(x0), float(x1)))
        else:
            violations.append((float(x0), float(x1)))
    return UnimodalityReport(violations, flat, uneven)


def noise_cost(c: NoiseCostFunction, P: NoiseDistribution,
               q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``∫ c(x) dP(x)``."""
    if isinstance(P, Uniform):
        return float(c.antiderivative(P.width)) / P.width
    if isinstance(P, MixtureOfUniforms):
        return math.fsum(w * float(c.antiderivative(d)) / d for w, d in zip(P.weights, P.widths))
    r = P.radius
    cuts = np.concatenate([P.knots(), c.kinks()])
    return 2.0 * q.integrate(lambda x: float(c(x)) * float(P.pdf(x)), 0.0, r, cuts)


def experiment_cost(c: NoiseCostFunction, P: Experiment, F: MixedDistribution,
                    q: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Expected noise cost of experiment ``P`` under prior ``F``."""
    cache: dict[int, float] = {}

    def per_state(theta):
        law = P.noise_for(theta)
        key = id(law)
        if key not in cache:
            cache[key] = noise_cost(c, law, q)
        return cache[key]

    return integrate(F, per_state, q)
