"""Command-line entry point: ``noisecost <command> [scenario] [--out FILE]``.

Results are JSON documents with sorted keys and numbers rounded to 12
significant digits, so identical inputs give byte-identical output.  Exit
codes: 0 success, 2 invalid input, 3 numerical failure, 4 first-order check
failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from typing import Sequence

import numpy as np

from . import config
from .axioms import run_axiom_suites
from .costs import NoiseCostFunction, experiment_cost, noise_cost
from .errors import NumericalError, ValidationError
from .measures import discretize
from .optimize import SolverResult, StateObjective, result_for_widths, solve
from .scenario import (LIMIT_DEMO_LABEL, TRADE_DEMO_LABEL, clarke_example, nonexistence_sequence,
                       trade_demo, trade_problem)
from .uniformize import dominating_uniform_experiment

log = logging.getLogger("noisecost")

COMMANDS = ("solve", "cost", "dominance-check", "foc-check", "example-nonexistence",
            "clarke-demo", "trade-demo", "axioms")
NEEDS_SCENARIO = {"solve", "cost", "dominance-check", "foc-check"}
SIG_DIGITS = 12
CSV_SAMPLES = 64

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_FOC = 0, 2, 3, 4


def _num(x: float):
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return float(f"{x:.{SIG_DIGITS}g}")


def _clean(obj):
    """Round every number and make keys strings, recursively."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def _rule_tables(rule) -> dict:
    return {
        "breakpoints": [{"signal": s, "left": rule.actions[k], "at": rule.at_breakpoints[k],
                         "right": rule.actions[k + 1]} for k, s in enumerate(rule.breakpoints)],
        "pieces": [{"lo": lo, "hi": hi, "action": a} for lo, hi, a in rule.pieces()],
    }


def _result_doc(res: SolverResult) -> dict:
    return {
        "widths": [{"state": t, "mass": m, "delta": res.widths[t], "perfect": res.widths[t] == 0.0}
                   for t, m in zip(res.states, res.masses)],
        "rule": _rule_tables(res.rule),
        "benefit": {"B": res.B, "C": res.C, "V": res.V},
        "foc": [{"state": t, "kind": e.kind, "residual": e.residual, "passed": e.passed,
                 "lo": e.interval.lo if e.interval else None,
                 "hi": e.interval.hi if e.interval else None}
                for t, e in res.foc.items()],
        "foc_passed": res.foc_passed,
        "converged": res.converged,
        "iterations": res.iterations,
        "history": res.history,
    }


def _w_samples(res: SolverResult, problem, c) -> list[tuple]:
    """``(theta, delta, W(delta))`` rows for plotting, rule held at the result's."""
    rows = []
    deltas = res.bound * np.arange(1, CSV_SAMPLES + 1) / CSV_SAMPLES
    for t in res.states:
        obj = StateObjective(t, res.rule, problem, c)
        rows.extend((t, float(d), obj(float(d))) for d in deltas)
    return rows


def _write_csv(path: str, rows: list[tuple]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "delta", "W"])
    for row in rows:
        w.writerow([repr(_num(v)) if isinstance(_num(v), float) else _num(v) for v in row])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _solver_args(sc: config.Scenario, seed, threads) -> dict:
    s = dict(sc.solver)
    if seed is not None:
        s["seed"] = int(seed)
    return {"tol": float(s["tol"]), "max_iter": int(s["max_iter"]),
            "restarts": int(s["restarts"]), "seed": int(s["seed"]), "threads": int(threads)}


def cmd_solve(sc, args) -> tuple[dict, int, list]:
    sc.require("prior", "problem", "cost", "bound")
    sargs = _solver_args(sc, args.seed, args.threads)
    res = solve(sc.prior, sc.problem, sc.cost, sc.bound, **sargs)
    doc = {"seed": sargs["seed"], **_result_doc(res)}
    code = EXIT_OK
    if args.strict and not res.foc_passed:
        code = EXIT_FOC
    elif args.strict and not res.converged:
        code = EXIT_NUMERIC
    return doc, code, _w_samples(res, sc.problem, sc.cost)


def cmd_foc_check(sc, args):
    sc.require("prior", "problem", "cost", "bound")
    if sc.widths is None:
        raise ValidationError("foc-check needs experiment.widths (0 marks a perfect signal)")
    res = result_for_widths(sc.prior, sc.problem, sc.cost, sc.bound, sc.widths)
    code = EXIT_FOC if args.strict and not res.foc_passed else EXIT_OK
    return _result_doc(res), code, _w_samples(res, sc.problem, sc.cost)


def cmd_cost(sc, args):
    sc.require("prior", "cost", "experiment")
    G = discretize(sc.prior)
    per_state = [{"state": t, "mass": m,
                  "cost": noise_cost(sc.cost, sc.experiment.noise_for(t), sc.quadrature)}
                 for t, m in G.atoms]
    total = experiment_cost(sc.cost, sc.experiment, sc.prior, sc.quadrature)
    return {"per_state": per_state, "C": total}, EXIT_OK, []


def cmd_dominance(sc, args):
    sc.require("prior", "problem", "cost", "experiment")
    rep = dominating_uniform_experiment(sc.experiment, sc.prior, sc.problem, sc.cost,
                                        q=sc.quadrature)
    doc = {
        "widths": [{"state": t, "delta": d, "perfect": d == 0.0,
                    "choice": ("continuous" if ch == "continuous" else
                               None if ch is None else {"n": ch[0], "j": ch[1]})}
                   for (t, d), ch in zip(rep.widths.items(), rep.choices.values())],
        "V_P": rep.V_P, "V_H_fixed_rule": rep.V_H_fixed_rule, "V_H": rep.V_H,
        "margin": rep.margin, "margin_from_rule": rep.V_H - rep.V_H_fixed_rule,
        "dominates": rep.margin >= -1e-6,
        "rule_P": _rule_tables(rep.rule_P), "rule_H": _rule_tables(rep.rule_H),
    }
    return doc, EXIT_OK, []


def cmd_example(sc, args):
    demo = sc.demo if sc else {}
    c = sc.cost if sc and sc.cost else NoiseCostFunction.exp_decay(1.0, 1.0)
    rep = nonexistence_sequence(float(demo.get("p", 0.5)), demo.get("d_list", [1, 10, 100, 1000]),
                            c, float(demo.get("wide", 1e4)))
    doc = {"label": LIMIT_DEMO_LABEL, "p": rep.p, "wide": rep.wide,
           "rows": [{"d": r.d, "posterior": r.posterior, "posterior_limit": r.posterior_limit,
                     "cost": r.cost} for r in rep.rows],
           "costs_decreasing": rep.costs_decreasing}
    return doc, EXIT_OK, []


def cmd_clarke(sc, args):
    demo = sc.demo if sc else {}
    a = float(demo.get("a", 1.0))
    rows = clarke_example(a, demo.get("deltas", [-1.0, 0.0, 0.5, 1.0]))
    doc = {"a": a, "rows": [{"delta": r.delta, "numeric": [r.numeric.lo, r.numeric.hi],
                             "closed_form": [r.closed_form.lo, r.closed_form.hi],
                             "contains_zero": r.numeric.contains(0.0)} for r in rows]}
    return doc, EXIT_OK, []


def cmd_trade(sc, args):
    demo = sc.demo if sc else {}
    c = sc.cost if sc and sc.cost else NoiseCostFunction.exp_decay(1.0, 1.0)
    b = sc.bound if sc and math.isfinite(sc.bound) else 2.0
    price = float(demo.get("price", 0.5))
    sargs = _solver_args(sc or config.Scenario({}), args.seed, args.threads)
    res = trade_demo(price, demo.get("qualities", [0.0, 1.0]), float(demo.get("p", 0.5)),
                     c, b, **sargs)
    doc = {"label": TRADE_DEMO_LABEL, "price": price, "seed": sargs["seed"], **_result_doc(res)}
    code = EXIT_FOC if args.strict and not res.foc_passed else EXIT_OK
    return doc, code, _w_samples(res, trade_problem(price), c)


def cmd_axioms(sc, args):
    seed = 0 if args.seed is None else int(args.seed)
    rep = run_axiom_suites(seed)
    doc = {"seed": seed, "passed": rep.passed,
           "suites": [{"name": s.name, "checked": s.checked, "failed": s.failed,
                       "worst": s.worst, "limit": s.limit} for s in rep.suites]}
    return doc, EXIT_OK if rep.passed else EXIT_NUMERIC, []


HANDLERS = {"solve": cmd_solve, "cost": cmd_cost, "dominance-check": cmd_dominance,
            "foc-check": cmd_foc_check, "example-nonexistence": cmd_example,
            "clarke-demo": cmd_clarke, "trade-demo": cmd_trade, "axioms": cmd_axioms}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noisecost", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("scenario", nargs="?", help="YAML or JSON scenario file")
    p.add_argument("--out", help="write the result document here instead of stdout")
    p.add_argument("--csv", help="write (theta, delta, W) samples here")
    p.add_argument("--strict", action="store_true",
                   help="exit 4 when a first-order check fails (3 if not converged)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for solver restarts (results do not depend on it)")
    p.add_argument("--seed", type=int, default=None, help="overrides solver.seed")
    return p


def run(command: str, scenario_path: str | None = None, out_path: str | None = None,
        strict: bool = False, threads: int = 1, seed: int | None = None,
        csv_path: str | None = None) -> int:
    args = argparse.Namespace(command=command, scenario=scenario_path, out=out_path,
                              strict=strict, threads=threads, seed=seed, csv=csv_path)
    return _run(args)


def _run(args) -> int:
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        if args.command in NEEDS_SCENARIO and not args.scenario:
            raise ValidationError(f"{args.command} needs a scenario file")
        sc = config.load_scenario(args.scenario) if args.scenario else None
        body, code, rows = HANDLERS[args.command](sc, args)
    except ValidationError as exc:
        print(f"noisecost: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"noisecost: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    doc = {"command": args.command, "scenario": sc.raw if sc else None, **body}
    text = dumps(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv and rows:
        _write_csv(args.csv, rows)
    if code == EXIT_FOC:
        print("noisecost: first-order check failed", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="noisecost: %(message)s")
    return _run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
