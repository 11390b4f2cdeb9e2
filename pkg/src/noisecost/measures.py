"""Mixed priors (atoms plus an absolutely continuous part) and deterministic
integration against them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidDistribution, QuadratureNonConvergence

MASS_TOL = 1e-10
MIN_ATOM_MASS = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class Quadrature:
    """Integration rule with error control.

    ``rule`` is ``"adaptive-simpson"`` or ``"gauss-legendre"`` (16-point panels,
    bisected until a panel and its two halves agree).
    """

    rule: str = "adaptive-simpson"
    abs_tol: float = 1e-9
    max_subdivisions: int = 20000

    def __post_init__(self):
        if self.rule not in ("adaptive-simpson", "gauss-legendre"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def integrate(self, f: Callable[[float], float], a: float, b: float,
                  breakpoints: Iterable[float] = ()) -> float:
        """Integrate ``f`` over ``[a, b]``, splitting at interior ``breakpoints``."""
        if b < a:
            return -self.integrate(f, b, a, breakpoints)
        if b == a:
            return 0.0
        cuts = sorted({a, b, *(float(x) for x in breakpoints if a < x < b)})
        total_len = b - a
        budget = [self.max_subdivisions]
        out = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            tol = self.abs_tol * (hi - lo) / total_len
            if self.rule == "adaptive-simpson":
                out += _adaptive_simpson(f, lo, hi, tol, budget)
            else:
                out += _adaptive_gauss(f, lo, hi, tol, budget)
        return out


DEFAULT_QUADRATURE = Quadrature()


def _adaptive_simpson(f, a, b, tol, budget):
    # endpoints sampled just inside so jumps sitting on a cut do not count
    eta = 1e-13 * (b - a)
    fa, fm, fb = float(f(a + eta)), float(f(0.5 * (a + b))), float(f(b - eta))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol)]
    total = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, est, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        flm = float(f(0.5 * (lo + mid)))
        frm = float(f(0.5 * (mid + hi)))
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        diff = left + right - est
        if abs(diff) <= 15.0 * eps or hi - lo < 1e-14 * max(1.0, abs(lo)):
            total += left + right + diff / 15.0
            continue
        budget[0] -= 1
        if budget[0] < 0:
            raise QuadratureNonConvergence(
                f"adaptive Simpson exceeded max_subdivisions near [{lo:.6g}, {hi:.6g}]")
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps))
    return total


def _gl_panel(f, a, b):
    half = 0.5 * (b - a)
    centre = 0.5 * (a + b)
    return half * sum(w * float(f(centre + half * x)) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def _adaptive_gauss(f, a, b, tol, budget):
    stack = [(a, b, _gl_panel(f, a, b), tol)]
    total = 0.0
    while stack:
        lo, hi, est, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gl_panel(f, lo, mid), _gl_panel(f, mid, hi)
        if abs(left + right - est) <= eps or hi - lo < 1e-14 * max(1.0, abs(lo)):
            total += left + right
            continue
        budget[0] -= 1
        if budget[0] < 0:
            raise QuadratureNonConvergence(
                f"Gauss-Legendre exceeded max_subdivisions near [{lo:.6g}, {hi:.6g}]")
        stack.append((mid, hi, right, 0.5 * eps))
        stack.append((lo, mid, left, 0.5 * eps))
    return total


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative density on a closed interval, carrying its total mass.

    Build with :meth:`uniform`, :meth:`truncated_normal`, :meth:`grid` or
    :meth:`from_function`.
    """

    kind: str
    lo: float
    hi: float
    mass: float
    params: dict = field(default_factory=dict)
    _pdf: Callable = field(default=None, repr=False)
    knots: tuple = ()

    @classmethod
    def uniform(cls, lo: float, hi: float, mass: float = 1.0) -> "Density":
        if not hi > lo:
            raise InvalidDistribution("uniform density needs lo < hi")
        if mass < 0:
            raise InvalidDistribution("density mass must be nonnegative")
        height = mass / (hi - lo)

        def pdf(x):
            x = np.asarray(x, dtype=float)
            return np.where((x >= lo) & (x <= hi), height, 0.0)

        return cls("uniform", float(lo), float(hi), float(mass),
                   {"lo": lo, "hi": hi, "mass": mass}, pdf)

    @classmethod
    def truncated_normal(cls, mean: float, sd: float, lo: float, hi: float,
                         mass: float = 1.0) -> "Density":
        if not (sd > 0 and hi > lo):
            raise InvalidDistribution("truncated normal needs sd > 0 and lo < hi")
        z = 0.5 * (math.erf((hi - mean) / (sd * math.sqrt(2))) -
                   math.erf((lo - mean) / (sd * math.sqrt(2))))
        scale = mass / (z * sd * math.sqrt(2 * math.pi))

        def pdf(x):
            x = np.asarray(x, dtype=float)
            val = scale * np.exp(-0.5 * ((x - mean) / sd) ** 2)
            return np.where((x >= lo) & (x <= hi), val, 0.0)

        return cls("truncated-normal", float(lo), float(hi), float(mass),
                   {"mean": mean, "sd": sd, "lo": lo, "hi": hi, "mass": mass}, pdf)

    @classmethod
    def grid(cls, xs: Sequence[float], values: Sequence[float]) -> "Density":
        """Piecewise-linear density through ``(xs, values)``; mass is the exact
        integral of the interpolant."""
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise InvalidDistribution("grid density needs matching 1-D xs/values, >= 2 points")
        if np.any(np.diff(xs) <= 0):
            raise InvalidDistribution("grid density abscissae must be strictly increasing")
        if np.any(values < 0):
            raise InvalidDistribution("density must be nonnegative on its support")
        mass = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(xs)))
        lo, hi = float(xs[0]), float(xs[-1])

        def pdf(x):
            x = np.asarray(x, dtype=float)
            return np.where((x >= lo) & (x <= hi), np.interp(x, xs, values), 0.0)

        return cls("grid", lo, hi, mass, {"xs": xs.tolist(), "values": values.tolist()},
                   pdf, tuple(xs[1:-1].tolist()))

    @classmethod
    def from_function(cls, pdf: Callable, lo: float, hi: float, mass: float,
                      knots: Iterable[float] = ()) -> "Density":
        """Wrap an already-normalised callable; ``mass`` is trusted."""
        return cls("function", float(lo), float(hi), float(mass), {}, pdf,
                   tuple(sorted(float(k) for k in knots if lo < k < hi)))

    def pdf(self, x):
        return self._pdf(x)


@dataclass(frozen=True, eq=False)
class MixedDistribution:
    """Prior (or posterior) over states: Dirac atoms plus an optional density.

    ``atoms`` are ``(location, mass)`` pairs with strictly increasing locations.
    """

    atoms: tuple = ()
    density: Density | None = None

    def __post_init__(self):
        atoms = tuple((float(loc), float(m)) for loc, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        locs = [a[0] for a in atoms]
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise InvalidDistribution("atom locations must be strictly sorted and distinct")
        for loc, m in atoms:
            if not math.isfinite(loc):
                raise InvalidDistribution("atom locations must be finite")
            if m < MIN_ATOM_MASS or m > 1.0 + MASS_TOL:
                raise InvalidDistribution(
                    f"atom mass {m!r} at {loc!r} outside [{MIN_ATOM_MASS}, 1]")
        total = self.atom_mass + self.continuous_mass
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistribution(
                f"atom masses + density mass must sum to 1 (got {total:.12g})")

    @classmethod
    def point(cls, loc: float) -> "MixedDistribution":
        return cls(((loc, 1.0),))

    @classmethod
    def from_atoms(cls, locs: Sequence[float], masses: Sequence[float]) -> "MixedDistribution":
        pairs = sorted(zip(map(float, locs), map(float, masses)))
        return cls(tuple(pairs))

    @property
    def atom_mass(self) -> float:
        return math.fsum(m for _, m in self.atoms)

    @property
    def continuous_mass(self) -> float:
        return self.density.mass if self.density is not None else 0.0

    @property
    def is_atomic(self) -> bool:
        return self.density is None or self.density.mass == 0.0

    @property
    def locations(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    def support_bounds(self) -> tuple[float, float]:
        pts = [a[0] for a in self.atoms]
        if self.density is not None:
            pts += [self.density.lo, self.density.hi]
        return min(pts), max(pts)

    def f(self, theta: float) -> float:
        """Radon-Nikodym derivative w.r.t. Lebesgue plus counting measure on atoms."""
        for loc, m in self.atoms:
            if loc == theta:
                return m
        if self.density is None:
            return 0.0
        return float(self.density.pdf(theta))


def decompose(F: MixedDistribution):
    """Split ``F`` into its Dirac part and continuous part.

    Returns ``(atoms, density, atom_mass, continuous_mass)``.
    """
    return list(F.atoms), F.density, F.atom_mass, F.continuous_mass


def integrate(F: MixedDistribution, g: Callable[[float], float],
              q: Quadrature = DEFAULT_QUADRATURE, breakpoints: Iterable[float] = ()) -> float:
    """``∫ g dF``: exact sum over atoms plus quadrature against the density.

    ``breakpoints`` lists kinks of ``g`` so the quadrature can split there.
    """
    total = math.fsum(m * float(g(loc)) for loc, m in F.atoms)
    d = F.density
    if d is not None and d.mass > 0:
        cuts = list(d.knots) + list(breakpoints)
        total += q.integrate(lambda t: float(g(t)) * float(d.pdf(t)), d.lo, d.hi, cuts)
    return total


def discretize(F: MixedDistribution, nodes: int = 16) -> MixedDistribution:
    """Replace the continuous part by atoms at Gauss-Legendre nodes.

    Each knot-free piece of the density gets ``nodes`` points; atom masses are
    ``weight * density`` and the result is renormalised to total mass one.
    """
    if F.is_atomic:
        return F
    d = F.density
    x, w = np.polynomial.legendre.leggauss(nodes)
    cuts = [d.lo, *d.knots, d.hi]
    acc: dict[float, float] = {loc: m for loc, m in F.atoms}
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        pts = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        ms = 0.5 * (hi - lo) * w * np.asarray(d.pdf(pts), dtype=float)
        for p, m in zip(pts, ms):
            acc[float(p)] = acc.get(float(p), 0.0) + float(m)
    items = sorted((loc, m) for loc, m in acc.items() if m >= MIN_ATOM_MASS)
    total = math.fsum(m for _, m in items)
    return MixedDistribution(tuple((loc, m / total) for loc, m in items))
