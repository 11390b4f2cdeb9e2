"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also repeated in the terminal summary.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import dense_mixture_weights, two_state_value_grid

from noisecost import cli
from noisecost.axioms import random_garble, random_law, random_prior, run_axiom_suites
from noisecost.bayes import (DecisionProblem, Utility, gross_benefit, net_benefit, posterior,
                             signal_marginal)
from noisecost.costs import NoiseCostFunction, check_unimodal
from noisecost.errors import InvalidCost
from noisecost.experiments import (Experiment, GriddedDensity, make_uniform_experiment,
                                   restricted_garble)
from noisecost.measures import MixedDistribution
from noisecost.optimize import clarke_interval_numeric, solve
from noisecost.scenario import nonexistence_sequence
from noisecost.uniformize import ApproxGrid, approx_converges, dominating_uniform_experiment, \
    mixture_weights

DATA = Path(__file__).parent / "data"
RESULTS: dict[int, str] = {}


def report(n, ok, runtime, limit, detail):
    ok = bool(ok) and (limit is None or runtime < limit)
    budget = "" if limit is None else f" (limit {limit:g} s)"
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} [{runtime:.2f} s{budget}] {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def test_criterion_1_clarke_example():
    t0 = time.perf_counter()
    worst0 = worst1 = 0.0
    for a in (0.5, 1.0, 2.0):
        W = lambda d, a=a: 1.0 / (abs(d) + a)
        iv = clarke_interval_numeric(W, 0.0)
        worst0 = max(worst0, abs(iv.lo + 1 / a ** 2), abs(iv.hi - 1 / a ** 2))
        for d in (1.0, -1.0):
            g = -np.sign(d) / (1.0 + a) ** 2
            iv = clarke_interval_numeric(W, d)
            worst1 = max(worst1, abs(iv.lo - g), abs(iv.hi - g))
    dt = time.perf_counter() - t0
    assert report(1, worst0 <= 1e-5 and worst1 <= 1e-6, dt, 1.0,
                  f"max endpoint error at 0: {worst0:.2e} (tol 1e-5), at +-1: {worst1:.2e} (tol 1e-6)")


def test_criterion_2_nonexistence():
    t0 = time.perf_counter()
    rep = nonexistence_sequence(0.5, [1, 10, 100, 1000], NoiseCostFunction.exp_decay(1.0, 1.0),
                            wide=1e4)
    # Pr(theta1 | s) is constant on the theta1 support away from the wide state's edges
    F = MixedDistribution.from_atoms([0.0, 1.0], [0.5, 0.5])
    post_min = 1.0
    for row in rep.rows:
        H = make_uniform_experiment({0.0: 1e4, 1.0: row.d})
        for s in np.linspace(1.0 - row.d, 1.0 + row.d, 9)[1:-1]:
            post_min = min(post_min, dict(posterior(F, H, s).distribution.atoms).get(1.0, 0.0))
    costs_ok = rep.costs_decreasing and rep.costs[-1] < 5e-3
    dt = time.perf_counter() - t0
    posts = ", ".join(f"{r.posterior:.6f}" for r in rep.rows)
    assert report(2, post_min >= 0.999 and costs_ok, dt, 1.0,
                  f"posteriors [{posts}] min {post_min:.6f} (need >= 0.999); "
                  f"costs decreasing {rep.costs_decreasing}, final {rep.costs[-1]:.3e} (< 5e-3)")


def test_criterion_3_cost_axioms():
    t0 = time.perf_counter()
    rep = run_axiom_suites(seed=0, scenarios=200, garbles=100, tol=2e-9, margin=1e-9)
    dt = time.perf_counter() - t0
    by = {s.name: s for s in rep.suites}
    named = ("consistency", "prior-independence", "mixture-linearity", "blackwell-monotonicity")
    ok = all(by[n].passed and by[n].checked > 0 for n in named)
    detail = "; ".join(f"{s.name} {s.checked - s.failed}/{s.checked} worst {s.worst:.2e}"
                       for s in rep.suites)
    assert report(3, ok, dt, 30.0, detail)


def test_criterion_4_unimodal_costs():
    t0 = time.perf_counter()
    grid = np.linspace(-4.0, 4.0, 161)
    kinds = [NoiseCostFunction.exp_decay(1.0, 1.0), NoiseCostFunction.tent(1.0, 1.5),
             NoiseCostFunction.cauchy(1.0),
             NoiseCostFunction.grid([0.0, 0.5, 1.0, 3.0], [1.0, 0.7, 0.3, 0.0])]
    builtin_ok = all(check_unimodal(c, grid).ok for c in kinds)
    xs, vs = [0.0, 0.5, 1.0, 1.5], [1.0, 0.4, 0.6, 0.1]
    planted = check_unimodal(NoiseCostFunction.grid(xs, vs, validate=False), grid)
    try:
        NoiseCostFunction.grid(xs, vs)
        rejected = False
    except InvalidCost:
        rejected = True
    dt = time.perf_counter() - t0
    assert report(4, builtin_ok and not planted.ok and rejected, dt, 1.0,
                  f"built-in kinds pass: {builtin_ok}; planted inversion reported "
                  f"{planted.violations[:1]} and rejected: {rejected}")


def test_criterion_5_uniform_mixture_machinery():
    t0 = time.perf_counter()
    targets = {"tent": GriddedDensity.tent(1.0),
               "gauss": GriddedDensity.from_function(lambda x: np.exp(-0.5 * (x / 0.35) ** 2), 1.2)}
    worst = {"below": 0.0, "interp": 0.0, "sum": 0.0, "dense": 0.0}
    decreasing = True
    for law in targets.values():
        for n in (1, 2, 3, 4):
            grid = ApproxGrid(n)
            approx = mixture_weights(law, grid)
            chk = approx.check(points=10_000)
            worst["below"] = max(worst["below"], chk["below_target"])
            worst["interp"] = max(worst["interp"], chk["interpolation"])
            worst["sum"] = max(worst["sum"], approx.weight_sum)
            dense = dense_mixture_weights(law.pdf, grid.k, grid.spacing)
            worst["dense"] = max(worst["dense"], float(np.max(np.abs(approx.weights - dense))))
        rep = approx_converges(law, [1, 2, 3, 4])
        decreasing &= all(b < a for a, b in zip(rep.l1, rep.l1[1:]))
    ok = (worst["below"] <= 1e-12 and worst["interp"] <= 1e-9 and worst["sum"] <= 1 + 1e-12
          and worst["dense"] <= 1e-10 and decreasing)
    dt = time.perf_counter() - t0
    assert report(5, ok, dt, 10.0,
                  f"below {worst['below']:.1e}, interp {worst['interp']:.1e}, "
                  f"max weight sum {worst['sum']:.6f}, dense gap {worst['dense']:.1e}, "
                  f"L1 strictly decreasing {decreasing}")


def _dominance_case(seed):
    rng = np.random.default_rng(seed)
    F = random_prior(rng, 3)
    b = 2.0
    m = int(rng.integers(2, 6))
    acts = tuple(np.sort(rng.choice(np.round(np.linspace(-0.5, 1.5, 41), 3), m, replace=False)))
    problem = DecisionProblem(acts, Utility.quadratic_loss(float(rng.uniform(0.5, 2.0))))
    if rng.integers(2):
        c = NoiseCostFunction.tent(float(rng.uniform(0.05, 1.0)), float(rng.uniform(b, 2 * b)))
    else:
        c = NoiseCostFunction.exp_decay(float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.5, 2)))
    P = Experiment({t: GriddedDensity.tent(float(rng.uniform(0.1, 0.95) * b))
                    for t in F.locations}, bound=b)
    return F, problem, c, P


def test_criterion_6_uniform_dominance():
    t0 = time.perf_counter()
    worst, failures = np.inf, []
    for seed in range(50):
        F, problem, c, P = _dominance_case(seed)
        rep = dominating_uniform_experiment(P, F, problem, c, n_max=4)
        _, _, V_P = net_benefit(F, P, problem, c)
        margin = rep.V_H - V_P
        worst = min(worst, margin)
        if margin < -1e-6:
            failures.append(seed)
    dt = time.perf_counter() - t0
    assert report(6, not failures, dt, 60.0,
                  f"50 scenarios, worst V(H) - V(P) {worst:.3e} (need >= -1e-6), "
                  f"failing seeds {failures}")


def _two_atom_case(seed):
    rng = np.random.default_rng(1000 + seed)
    loc = float(np.round(rng.uniform(0.5, 1.5), 2))
    m0 = float(np.round(rng.uniform(0.2, 0.8), 2))
    m = int(rng.integers(2, 5))
    acts = tuple(np.sort(rng.choice(np.round(np.linspace(-0.25, 1.75, 41), 3), m, replace=False)))
    scale = float(np.round(10 ** rng.uniform(-3.0, -1.0), 5))
    if seed % 2:
        c = NoiseCostFunction.tent(scale, float(np.round(rng.uniform(0.5, 3.0), 2)))
    else:
        c = NoiseCostFunction.exp_decay(scale, float(np.round(rng.uniform(0.5, 2.0), 2)))
    return (0.0, loc), (m0, 1 - m0), DecisionProblem(acts, Utility.quadratic_loss()), c


def test_criterion_7_solver_vs_oracle():
    t0 = time.perf_counter()
    b = 2.0
    worst_gap = worst_res = 0.0
    bad = []
    for seed in range(10):
        locs, masses, problem, c = _two_atom_case(seed)
        F = MixedDistribution.from_atoms(list(locs), list(masses))
        res = solve(F, problem, c, b)

        def avg_cost(D, c=c):
            pos = D > 0
            return np.where(pos, c.average(np.where(pos, D, 1.0)), float(c(0.0)))

        V_or, _, _ = two_state_value_grid(locs, masses, problem.actions, problem.utility,
                                          avg_cost, b, step=1e-3)
        gap = abs(res.V - V_or)
        resid = max(e.residual for e in res.foc.values())
        worst_gap, worst_res = max(worst_gap, gap), max(worst_res, resid)
        if gap > 1e-4 or not res.foc_passed or resid >= 1e-5:
            bad.append(seed)
    dt = time.perf_counter() - t0
    assert report(7, not bad, dt, 120.0,
                  f"max |V - V_grid| {worst_gap:.2e} (tol 1e-4), max FOC residual "
                  f"{worst_res:.2e} (< 1e-5), failing cases {bad}")


def _uniform_case(rng):
    F = random_prior(rng, 5)
    widths = {t: float(rng.uniform(0.05, 1.9)) for t in F.locations}
    return F, make_uniform_experiment(widths, bound=2.0)


def test_criterion_8_bayes_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    norm_err = mart_err = 0.0
    invariant_exact = True
    raises = []
    for case in range(200):
        F, P = _uniform_case(rng)
        knots = sorted({t + k for t in F.locations for k in (-P.noise_for(t).width,
                                                              P.noise_for(t).width)})
        # posteriors are constant between signal knots, so midpoints integrate exactly
        acc = dict.fromkeys(F.locations, 0.0)
        for lo, hi in zip(knots[:-1], knots[1:]):
            s = 0.5 * (lo + hi)
            if signal_marginal(F, P, s) <= 0:
                continue
            post = posterior(F, P, s)
            atoms = dict(post.distribution.atoms)
            norm_err = max(norm_err, abs(sum(atoms.values()) - 1.0))
            for t in acc:
                acc[t] += atoms.get(t, 0.0) * post.marginal * (hi - lo)
        mart_err = max(mart_err, max(abs(acc[t] - m) for t, m in F.atoms))

        lo, hi = min(F.locations), max(F.locations)
        w = hi - lo + 0.5
        shared = make_uniform_experiment({t: w for t in F.locations}, bound=w + 1)
        s = float(rng.uniform(hi - w, lo + w))
        invariant_exact &= posterior(F, shared, s).distribution.atoms == F.atoms

        law = random_law(rng, 2.0)
        spec = random_garble(rng, law)
        Pl = Experiment({t: law for t in F.locations}, bound=2.0)
        Q = Experiment({t: restricted_garble(law, spec) for t in F.locations}, bound=4.0)
        m = int(rng.integers(2, 6))
        acts = tuple(np.sort(rng.choice(np.round(np.linspace(-0.5, 1.5, 41), 3), m,
                                        replace=False)))
        problem = DecisionProblem(acts, Utility.quadratic_loss())
        gain = gross_benefit(F, Q, problem) - gross_benefit(F, Pl, problem)
        if gain > 1e-9:
            raises.append((case, gain))
    dt = time.perf_counter() - t0
    ok = norm_err <= 1e-10 and mart_err <= 2e-9 and invariant_exact and not raises
    worst = max((g for _, g in raises), default=0.0)
    assert report(8, ok, dt, 30.0,
                  f"normalisation {norm_err:.1e}, martingale {mart_err:.1e}, "
                  f"invariant posterior exact {invariant_exact}, garbles raising B "
                  f"{len(raises)}/200 (worst +{worst:.2e}, tol 1e-9)")


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    outs = [tmp_path / "a.json", tmp_path / "b.json"]
    codes = [cli.run("solve", str(DATA / "two_atom.yaml"), str(p), seed=7) for p in outs]
    same = outs[0].read_bytes() == outs[1].read_bytes()
    dt = time.perf_counter() - t0
    seed = json.loads(outs[0].read_text())["seed"]
    assert report(9, codes == [0, 0] and same and seed == 7, dt, None,
                  f"exit codes {codes}, byte-identical {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
