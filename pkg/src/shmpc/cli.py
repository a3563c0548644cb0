"""Command-line workbench: run experiments and inspect a scenario statically.

Exit codes: 0 success, 2 schema/usage error, 3 infeasible, 4 solver limit.
Verbosity is controlled by the SHMPC_LOG environment variable (DEBUG, INFO,
WARNING, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import stl
from .canonical import FormContext, max_min_form, min_max_form
from .chance import AT_LEAST, InfeasibleDecompositionError, decompose
from .controller import (CD_STRATEGY, HOLD_PREVIOUS, TERMINATE,
                         monte_carlo_verify)
from .encode import DecisionMap, ProgramBuilder, encode_min_of_maxmin
from .expectation import bounded_expectation_bound
from .milp import ITER_LIMIT
from .reporting import summary_dict, summary_json_text, write_report
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER_LIMIT = 4

log = logging.getLogger("shmpc")


def _setup_logging() -> None:
    level = os.environ.get("SHMPC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if args.delta is not None:
        sc.spec.delta = args.delta
    if args.p_order is not None:
        sc.spec.p_order = args.p_order
        if args.p_order not in sc.spec.p_orders:
            sc.spec.p_orders = tuple(sorted(set(sc.spec.p_orders) | {args.p_order}))
    if args.risk_policy is not None:
        sc.spec.risk_policy = args.risk_policy
    if args.runs is not None:
        sc.runs = args.runs
    if args.seed is not None:
        sc.seed = args.seed
    if args.out is not None:
        sc.out_dir = args.out
    if args.fallback is not None:
        sc.fallback = {"hold": HOLD_PREVIOUS, "terminate": TERMINATE}[args.fallback]
    if args.mode is not None:
        sc.mode = args.mode
    if args.noise == "off":
        sc.model = sc.model.zeroed()
    sc.spec.validate(sc.sys)
    return sc


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    sc = _apply_overrides(sc, args)
    log.info("running %s: mode=%s runs=%d seed=%d delta=%g",
             sc.name, sc.mode, sc.runs, sc.seed, sc.spec.delta)
    try:
        summary = monte_carlo_verify(sc.spec, sc.sys, sc.model, sc.runs, sc.seed,
                                     signals=sc.signals, x0=sc.x0, beta=sc.beta,
                                     fallback=sc.fallback, mode=sc.mode)
    except InfeasibleDecompositionError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    except RuntimeError as exc:
        print("solver limit: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER_LIMIT
    data = summary_dict(summary, sc.name, sc.mode, sc.seed, sc.spec.delta)
    write_report(sc.out_dir, data, summary.runs)
    print(summary_json_text(data), end="")
    log.info("report written to %s", sc.out_dir)
    limit_hit = any(rec.status == ITER_LIMIT for r in summary.runs for rec in r.steps)
    if limit_hit:
        return EXIT_SOLVER_LIMIT
    if summary.feasibility_rate == 0.0:
        return EXIT_INFEASIBLE
    return EXIT_OK


def static_report(sc: Scenario) -> dict:
    """Horizons, audit tree, form sizes, per-step risk, certified big-Ms."""
    budget = sc.spec.budget()
    ctx = FormContext(sys=sc.sys, t=0, x_hist=sc.x0[None, :], N=sc.spec.N,
                      signals=sc.signals, atom_budget=sc.spec.atom_budget)
    mm = max_min_form(sc.spec.psi, 0, ctx)
    mn = min_max_form(sc.spec.psi, 0, ctx)
    report = {
        "scenario": sc.name,
        "formula_horizon": stl.horizon(sc.spec.phi),
        "objective_horizon": stl.horizon(sc.spec.psi),
        "N": sc.spec.N,
        "delta": sc.spec.delta,
        "per_step_delta": [float(d) for d in budget.per_step],
        "canonical_form_sizes": {
            "max_min_groups": list(mm.group_sizes),
            "min_max_groups": list(mn.group_sizes),
            "max_min_atoms": mm.total_atoms,
            "min_max_atoms": mn.total_atoms,
        },
    }
    try:
        _leaves, tree = decompose(sc.spec.phi, 0, 1.0 - budget.per_step[0],
                                  AT_LEAST, ctx)
        report["decomposition_audit"] = tree.to_json()
        report["n_chance_atoms"] = len(_leaves)
    except InfeasibleDecompositionError as exc:
        report["decomposition_audit"] = {"infeasible": str(exc)}
    if sc.model.kind == "bounded":
        builder = ProgramBuilder()
        dmap = DecisionMap.for_horizon(builder, 0, sc.spec.N, sc.sys.m,
                                       sc.sys.input_box)
        j_form = mn.negate()
        bound_form = bounded_expectation_bound(j_form, sc.model)
        constant = (len(bound_form.groups) == 1 and len(bound_form.groups[0]) == 1
                    and bound_form.groups[0][0].is_constant)
        if not constant:
            encode_min_of_maxmin(builder, bound_form, dmap)
        report["big_m"] = {k: float(v) for k, v in sorted(builder.big_m.items())}
    else:
        report["big_m"] = {}
        report["gaussian_p_orders"] = list(sc.spec.p_orders)
    return report


def cmd_check(args) -> int:
    sc = load_scenario(args.scenario)
    report = static_report(sc)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shmpc",
        description="Shrinking-horizon MPC under STL chance constraints")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run closed-loop or open-loop experiments")
    run_p.add_argument("scenario", help="path to a scenario JSON file")
    run_p.add_argument("--mode", choices=["shmpc", "openloop"], default=None)
    run_p.add_argument("--runs", type=int, default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--delta", type=float, default=None)
    run_p.add_argument("--p-order", type=int, default=None, dest="p_order")
    run_p.add_argument("--risk-policy", choices=["uniform", "weights"],
                       default=None, dest="risk_policy")
    run_p.add_argument("--fallback", choices=["hold", "terminate"], default=None)
    run_p.add_argument("--out", default=None, help="report directory")
    run_p.add_argument("--noise", choices=["on", "off"], default="on",
                       help="off replaces the disturbance with zeros")
    run_p.set_defaults(func=cmd_run)

    check_p = sub.add_parser("check", help="static analysis, no solving")
    check_p.add_argument("scenario")
    check_p.add_argument("--out", default=None, help="write the report here too")
    check_p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("scenario error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print("cannot read %s" % exc.filename, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
