"""Scenario files: YAML (or JSON, which YAML also reads) describing a prior,
decision problem, noise cost, bound and solver settings.

Example::

    prior: {atoms: [[0, 0.5], [1, 0.5]]}
    actions: [0, 0.5, 1]
    utility: {kind: quadratic-loss, params: {scale: 1}}
    cost: {kind: exp-decay, params: {scale: 1, rate: 1}}
    bound: 2
    solver: {tol: 1.0e-6, max_iter: 200, restarts: 8, seed: 0}

Optional sections: ``signal`` (only ``additive``), ``quadrature``,
``experiment`` (noise per state, for ``cost``, ``dominance-check`` and
``foc-check``) and ``demo`` (parameters of the canned demos).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .bayes import DecisionProblem, Utility
from .costs import NoiseCostFunction
from .errors import ScenarioError, ValidationError
from .experiments import (Experiment, GriddedDensity, MixtureOfUniforms, NoiseDistribution,
                          SignalFunction, Uniform)
from .measures import Density, MixedDistribution, Quadrature

TOP_KEYS = {"prior", "actions", "utility", "cost", "bound", "signal", "solver",
            "quadrature", "experiment", "demo"}
SOLVER_DEFAULTS = {"tol": 1e-6, "max_iter": 200, "restarts": 8, "seed": 0}


@dataclass
class Scenario:
    raw: dict
    prior: MixedDistribution | None = None
    problem: DecisionProblem | None = None
    cost: NoiseCostFunction | None = None
    bound: float = math.inf
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    quadrature: Quadrature = field(default_factory=Quadrature)
    experiment: Experiment | None = None
    widths: dict | None = None
    demo: dict = field(default_factory=dict)
    experiment_error: Exception | None = None

    def require(self, *names: str) -> None:
        # widths at the bound or 0 are valid solver output but not an Experiment
        if "experiment" in names and self.experiment_error is not None:
            raise self.experiment_error
        missing = [n for n in names if getattr(self, n) is None or
                   (n == "bound" and not math.isfinite(self.bound))]
        if missing:
            raise ScenarioError(f"scenario is missing required section(s): {', '.join(missing)}")


def _keys(section: Any, where: str, allowed: set, required: set = frozenset()) -> dict:
    if not isinstance(section, dict):
        raise ScenarioError(f"{where} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(map(str, unknown)))}")
    missing = required - set(section)
    if missing:
        raise ScenarioError(f"{where} is missing key(s): {', '.join(sorted(missing))}")
    return section


def _density(spec: dict) -> Density:
    spec = _keys(spec, "prior.density", {"kind", "params", "support"}, {"kind"})
    kind, p = spec["kind"], dict(spec.get("params") or {})
    lo, hi = spec.get("support", (None, None))
    if kind == "uniform":
        return Density.uniform(lo, hi, p.get("mass", 1.0))
    if kind == "truncated-normal":
        return Density.truncated_normal(p["mean"], p["sd"], lo, hi, p.get("mass", 1.0))
    if kind == "grid":
        return Density.grid(p["xs"], p["values"])
    raise ScenarioError(f"unknown density kind {kind!r}")


def parse_prior(spec: dict) -> MixedDistribution:
    spec = _keys(spec, "prior", {"atoms", "density"})
    atoms = spec.get("atoms") or []
    if any(not isinstance(a, (list, tuple)) or len(a) != 2 for a in atoms):
        raise ScenarioError("prior.atoms must be a list of [location, mass] pairs")
    pairs = sorted((float(loc), float(m)) for loc, m in atoms)
    density = _density(spec["density"]) if spec.get("density") else None
    return MixedDistribution(tuple(pairs), density)


def parse_utility(spec: dict) -> Utility:
    spec = _keys(spec, "utility", {"kind", "params"}, {"kind"})
    p = dict(spec.get("params") or {})
    kind = spec["kind"]
    if kind == "quadratic-loss":
        return Utility.quadratic_loss(p.get("scale", 1.0))
    if kind == "trade":
        return Utility.trade(p["price"])
    if kind == "table":
        return Utility.table(p["states"], p["actions"], p["values"])
    raise ScenarioError(f"unknown utility kind {kind!r}")


def parse_cost(spec: dict) -> NoiseCostFunction:
    spec = _keys(spec, "cost", {"kind", "params"}, {"kind"})
    p = dict(spec.get("params") or {})
    kind = spec["kind"]
    try:
        if kind == "exp-decay":
            return NoiseCostFunction.exp_decay(**p)
        if kind == "tent":
            return NoiseCostFunction.tent(**p)
        if kind == "cauchy":
            return NoiseCostFunction.cauchy(**p)
        if kind == "grid":
            return NoiseCostFunction.grid(p["xs"], p["values"])
    except TypeError as exc:
        raise ScenarioError(f"bad cost parameters: {exc}") from None
    raise ScenarioError(f"unknown cost kind {kind!r}")


def parse_noise(spec: dict) -> NoiseDistribution:
    spec = _keys(spec, "noise law", {"state", "kind", "params"}, {"kind"})
    p = dict(spec.get("params") or {})
    kind = spec["kind"]
    if kind == "uniform":
        return Uniform(float(p["width"]))
    if kind == "tent":
        return GriddedDensity.tent(float(p["width"]))
    if kind == "gridded":
        return GriddedDensity(tuple(p["xs"]), tuple(p["values"]), bool(p.get("strict", True)))
    if kind == "mixture":
        return MixtureOfUniforms(tuple(p["weights"]), tuple(p["widths"]))
    raise ScenarioError(f"unknown noise kind {kind!r}")


def parse_experiment(spec: dict, bound: float) -> Experiment:
    """Either ``widths: {state: width}`` (uniform noise) or ``noise: [...]``
    entries with a ``state`` key; ``default`` covers a continuous prior."""
    spec = _keys(spec, "experiment", {"widths", "noise", "default"})
    assignment: dict[float, NoiseDistribution] = {}
    for state, w in (spec.get("widths") or {}).items():
        assignment[float(state)] = Uniform(float(w))
    for entry in spec.get("noise") or []:
        if "state" not in entry:
            raise ScenarioError("each experiment.noise entry needs a state")
        assignment[float(entry["state"])] = parse_noise(entry)
    default = parse_noise(spec["default"]) if spec.get("default") else None
    return Experiment(assignment, SignalFunction(), bound, default)


def parse_scenario(raw: dict) -> Scenario:
    raw = _keys(raw or {}, "scenario", TOP_KEYS)
    sc = Scenario(raw)
    if "signal" in raw:
        sig = _keys(raw["signal"], "signal", {"kind"}, {"kind"})
        if sig["kind"] != "additive":
            raise ScenarioError("scenario files support only the additive signal")
    if "bound" in raw:
        sc.bound = float(raw["bound"])
    if "prior" in raw:
        sc.prior = parse_prior(raw["prior"])
    if "actions" in raw or "utility" in raw:
        if "actions" not in raw or "utility" not in raw:
            raise ScenarioError("actions and utility must be given together")
        sc.problem = DecisionProblem(tuple(raw["actions"]), parse_utility(raw["utility"]))
    if "cost" in raw:
        sc.cost = parse_cost(raw["cost"])
    if "solver" in raw:
        sc.solver.update(_keys(raw["solver"], "solver", set(SOLVER_DEFAULTS)))
    if "quadrature" in raw:
        q = _keys(raw["quadrature"], "quadrature", {"abs_tol", "max_subdivisions", "rule"})
        try:
            sc.quadrature = Quadrature(**q)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad quadrature settings: {exc}") from None
    if "experiment" in raw:
        exp = _keys(raw["experiment"], "experiment", {"widths", "noise", "default"})
        if exp.get("widths") and not exp.get("noise"):
            sc.widths = {float(t): float(w) for t, w in exp["widths"].items()}
        try:
            sc.experiment = parse_experiment(exp, sc.bound)
        except ValidationError as exc:
            if sc.widths is None:
                raise
            sc.experiment_error = exc
    if "demo" in raw:
        sc.demo = dict(_keys(raw["demo"], "demo",
                             {"p", "d_list", "wide", "a", "deltas", "price", "qualities"}))
    return sc


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario file is not valid YAML/JSON: {exc}") from None
    try:
        return parse_scenario(raw)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from None
