import math

import numpy as np
import pytest

from noisecost.errors import InvalidDistribution, QuadratureNonConvergence
from noisecost.measures import (Density, MixedDistribution, Quadrature, decompose, discretize,
                                integrate)


def test_atoms_must_sum_to_one():
    with pytest.raises(InvalidDistribution, match="sum to 1"):
        MixedDistribution.from_atoms([0.0, 1.0], [0.5, 0.4])


def test_atoms_sorted_and_distinct():
    with pytest.raises(InvalidDistribution):
        MixedDistribution(((1.0, 0.5), (0.0, 0.5)))
    with pytest.raises(InvalidDistribution):
        MixedDistribution(((0.0, 0.5), (0.0, 0.5)))


def test_tiny_atom_rejected():
    with pytest.raises(InvalidDistribution):
        MixedDistribution(((0.0, 1.0 - 1e-13), (1.0, 1e-13)))


def test_mixed_prior_decomposes():
    F = MixedDistribution(((0.0, 0.3),), Density.uniform(1.0, 2.0, 0.7))
    atoms, dens, am, cm = decompose(F)
    assert atoms == [(0.0, 0.3)]
    assert dens is F.density
    assert am == pytest.approx(0.3) and cm == pytest.approx(0.7)
    assert F.f(0.0) == 0.3 and F.f(1.5) == pytest.approx(0.7)


def test_integrate_mean_of_mixed_prior():
    F = MixedDistribution(((0.0, 0.3),), Density.uniform(1.0, 2.0, 0.7))
    # 0.3 * 0 + 0.7 * 1.5
    assert integrate(F, lambda t: t) == pytest.approx(1.05, abs=1e-9)


@pytest.mark.parametrize("rule", ["adaptive-simpson", "gauss-legendre"])
def test_quadrature_smooth_and_kinked(rule):
    q = Quadrature(rule=rule, abs_tol=1e-11)
    assert q.integrate(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert q.integrate(lambda x: abs(x - 0.3), 0.0, 1.0, [0.3]) == pytest.approx(0.29, abs=1e-11)


def test_quadrature_budget_exhaustion():
    q = Quadrature(abs_tol=1e-14, max_subdivisions=3)
    with pytest.raises(QuadratureNonConvergence):
        q.integrate(lambda x: math.sin(50 * x), 0.0, 3.0)


def test_truncated_normal_mass():
    d = Density.truncated_normal(0.0, 1.0, -1.0, 2.0)
    q = Quadrature(abs_tol=1e-11)
    assert q.integrate(lambda x: float(d.pdf(x)), -1.0, 2.0) == pytest.approx(1.0, abs=1e-10)


def test_discretize_preserves_moments():
    F = MixedDistribution(((-1.0, 0.2),), Density.truncated_normal(0.5, 0.4, 0.0, 1.0, 0.8))
    G = discretize(F, 16)
    assert G.is_atomic
    assert G.atom_mass == pytest.approx(1.0, abs=1e-12)
    for g in (lambda t: t, lambda t: t * t):
        assert integrate(G, g) == pytest.approx(integrate(F, g, Quadrature(abs_tol=1e-12)), abs=1e-9)


def test_discretize_atomic_is_identity():
    F = MixedDistribution.from_atoms([0.0, 1.0], [0.25, 0.75])
    assert discretize(F) is F
