"""Command-line entry point: ``pslab <command> ...``.

Exit codes: 0 success, 1 invalid input (bad flags, unreadable or invalid
files), 2 infeasible problem or a failed check. Numeric results go to stdout
as JSON; tables go to CSV files. Outputs are deterministic; wall-clock
columns are filled only with ``--timing``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import corpus
from .lp import TOLERANCES, LpError
from .mechanism import (
    FormatError,
    Scenario,
    ScenarioError,
    load_rule,
    load_scenario,
    save_rule,
    validate,
)
from .model import OBJECTIVES, ModelError
from .policy import PolicyError

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- arg types


def _positive_int(flag):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {v}")
        return v
    return parse


def _positive_float(flag):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        if not np.isfinite(v) or v <= 0:
            raise argparse.ArgumentTypeError(f"{flag} must be a positive number, got {text}")
        return v
    return parse


def _float_list(flag):
    def parse(text):
        try:
            vals = tuple(float(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"{flag} expects comma-separated numbers, got {text!r}") from None
        if not vals or not all(np.isfinite(vals)):
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated numbers, got {text!r}")
        return vals
    return parse


def _int_list(flag):
    def parse(text):
        try:
            vals = [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"{flag} expects comma-separated integers, got {text!r}") from None
        if not vals or min(vals) < 1:
            raise argparse.ArgumentTypeError(f"{flag} expects positive integers, got {text!r}")
        return vals
    return parse


# ---------------------------------------------------------------- helpers


def _load_scenario(args) -> Scenario:
    name = args.scenario
    if name in corpus.SCENARIOS:
        scen = corpus.scenario(name)
    else:
        if not Path(name).is_file():
            raise UsageError(f"--scenario: no such file or bundled scenario {name!r} "
                             f"(bundled: {', '.join(corpus.SCENARIOS)})")
        scen = load_scenario(name)
    if getattr(args, "grid", None) is not None:
        scen = scen.with_grid(args.grid)
    if getattr(args, "objective", None) is not None:
        from dataclasses import replace
        scen = replace(scen, objective=args.objective)
    part = getattr(args, "partition", None)
    k = getattr(args, "k", None)
    if part is not None:
        scen = scen.with_partition(part)
    elif k is not None and k != scen.K:
        scen = scen.with_partition((1.0 / k,) * k)
    return scen


def _load_rule(args, scen: Scenario):
    if not Path(args.rule).is_file():
        if args.rule in ("pigou2_full_revelation",):
            rule = corpus.rule(args.rule, scen)
        else:
            raise UsageError(f"--rule: no such file {args.rule!r}")
    else:
        rule = load_rule(args.rule, scen.network.states)
    if rule.grid_m != scen.grid_m:
        scen = scen.with_grid(rule.grid_m)
    if rule.K != scen.K and getattr(args, "partition", None) is None:
        scen = scen.with_partition((1.0 / rule.K,) * rule.K)
    rep = validate(rule, scen)
    if not rep.ok:
        raise FormatError("invalid rule: " + "; ".join(rep.issues))
    return rule, scen


def _emit(data: dict, out=None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _scenario_info(scen: Scenario) -> dict:
    return {"name": scen.name, "grid_m": scen.grid_m, "K": scen.K,
            "partition": [float(v) for v in scen.x], "objective": scen.objective}


# ---------------------------------------------------------------- commands


def cmd_solve(args) -> int:
    from .planner import PlannerCapError, PlannerInfeasible, solve_optimal_mechanism

    scen = _load_scenario(args)
    try:
        sol = solve_optimal_mechanism(scen, method=args.method)
    except PlannerInfeasible as exc:
        _emit({"status": "infeasible", "message": str(exc), "scenario": _scenario_info(scen)})
        return EXIT_FAILED
    except PlannerCapError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        save_rule(sol.rule, args.out, scen.network.states)
    _emit({
        "status": "optimal",
        "value": sol.value,
        "scenario": _scenario_info(scen),
        "lp": {"method": sol.lp.method, "iterations": sol.lp.iterations,
               "duality_gap": sol.lp.duality_gap, "residual": sol.lp.residual},
        "atoms": sum(len(a) for a in sol.rule.atoms),
        "rule_file": args.out,
    })
    return EXIT_OK


def cmd_verify(args) -> int:
    from .atomic import equal_weight_scenario
    from .obedience import verify_ps_bce_atomic, verify_ps_bcwe

    scen = _load_scenario(args)
    rule, scen = _load_rule(args, scen)
    if args.atomic:
        if args.n is not None:
            sc = equal_weight_scenario(scen, args.n)
        elif scen.atomic is not None:
            sc = scen
        else:
            raise UsageError("--atomic needs --n (equal-weight travelers) for a nonatomic scenario")
        rep = verify_ps_bce_atomic(rule, sc, args.eps)
        kind = "ps_bce_atomic"
    else:
        rep = verify_ps_bcwe(rule, scen, args.eps)
        kind = "ps_bcwe"
    data = {"check": kind, **rep.to_dict(), "scenario": _scenario_info(scen)}
    if args.atomic:
        data["n"] = sc.atomic.n
    _emit(data, args.out)
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_sweep(args) -> int:
    from .planner import sweep_partitions

    scen = _load_scenario(args)
    rows, best = sweep_partitions(scen, args.k, args.step, method=args.method)
    header = [f"x{k + 1}" for k in range(args.k)] + ["J*", "status", "solve_ms"]
    _write_csv(args.out, header, [
        list(r.x) + [r.value, r.status, r.solve_ms if args.timing else None] for r in rows])
    _emit({
        "cells": len(rows),
        "solved": sum(r.value is not None for r in rows),
        "best": None if best is None else {"x": list(best.x), "value": best.value},
        "csv": args.out,
        "scenario": _scenario_info(scen),
    })
    return EXIT_OK if best is not None else EXIT_FAILED


def cmd_bpd(args) -> int:
    from .bpd import verify_theorem2

    scen = _load_scenario(args)
    load = np.asarray(args.load, dtype=float)
    if load.size != scen.network.num_edges:
        raise UsageError(f"--load: expected {scen.network.num_edges} values, got {load.size}")
    rep = verify_theorem2(scen, args.k, load, args.step)
    header = [f"x{k + 1}" for k in range(args.k)] + ["in_IP", "in_BPD", "slack", "boundary"]
    _write_csv(args.out, header, [
        list(c.x) + [c.in_ip, c.in_bpd, c.slack, c.boundary] for c in rep.cells])
    _emit({
        "cells": len(rep.cells),
        "ip_count": len(rep.ip_set),
        "bpd_count": len(rep.bpd_set),
        "mismatches": [list(c.x) for c in rep.mismatches],
        "agree_exactly": rep.agree_exactly,
        "boundary_only": rep.boundary_only,
        "csv": args.out,
    })
    return EXIT_OK if rep.boundary_only else EXIT_FAILED


def cmd_acl(args) -> int:
    from .acl import check_proposition1

    scen = _load_scenario(args)
    rule, scen = _load_rule(args, scen)
    rep = check_proposition1(rule, scen, args.max_t, args.tau, args.eps)
    _emit(rep.to_dict(scen.grid()), args.out)
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_converge(args) -> int:
    from .atomic import convergence_experiment, loglog_fit

    scen = _load_scenario(args)
    rule, scen = _load_rule(args, scen)
    rows = convergence_experiment(rule, scen, args.n, args.eps, timing=args.timing)
    _write_csv(args.out, ["n", "max_gap", "witness_traveler", "witness_route", "eval_ms"],
               [[r.n, r.max_gap, r.witness_traveler, r.witness_route, r.eval_ms] for r in rows])
    data = {"rows": [{"n": r.n, "max_gap": r.max_gap} for r in rows], "csv": args.out}
    gaps = [r.max_gap for r in rows]
    if len(rows) >= 2 and min(gaps) > 0:
        fit = loglog_fit([r.n for r in rows], gaps)
        data["loglog"] = {"slope": fit.slope, "r2": fit.r2}
    _emit(data)
    return EXIT_OK


def cmd_baselines(args) -> int:
    from .planner import (
        PlannerInfeasible,
        baseline_full_information,
        baseline_no_information,
        mp_bcwe_value,
        solve_optimal_mechanism,
    )

    scen = _load_scenario(args)
    nb = baseline_no_information(scen)
    data = {
        "scenario": _scenario_info(scen),
        "full_information": baseline_full_information(scen),
        "no_information": {"value": nb.value, "flow": nb.flow.tolist(), "violation": nb.violation},
    }
    try:
        data["ps_bcwe"] = solve_optimal_mechanism(scen, method=args.method).value
    except PlannerInfeasible:
        data["ps_bcwe"] = None
    try:
        data["mp_bcwe"] = mp_bcwe_value(scen, method=args.method)
    except PlannerInfeasible:
        data["mp_bcwe"] = None
    _emit(data, args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    from .atomic import sample_realizations

    scen = _load_scenario(args)
    rule, scen = _load_rule(args, scen)
    draws = sample_realizations(rule, scen, args.seed, args.count)
    grid = scen.grid()
    states = scen.network.states
    rows = [[i, states[s], " ".join("/".join(repr(float(v)) for v in grid.policies[g]) for g in prof)]
            for i, (s, prof) in enumerate(draws)]
    if args.out:
        _write_csv(args.out, ["draw", "state", "profile"], rows)
    freq = {name: 0 for name in states}
    for s, _ in draws:
        freq[states[s]] += 1
    _emit({"seed": args.seed, "count": args.count, "state_counts": freq, "csv": args.out})
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pslab", description="Publicness-specific recommendation mechanisms for routing games.")
    p.add_argument("--tol-feasibility", type=_positive_float("--tol-feasibility"),
                   default=TOLERANCES["feasibility"], help="LP primal feasibility tolerance")
    p.add_argument("--tol-optimality", type=_positive_float("--tol-optimality"),
                   default=TOLERANCES["optimality"], help="LP reduced-cost tolerance")
    p.add_argument("--tol-duality", type=_positive_float("--tol-duality"),
                   default=TOLERANCES["duality"], help="LP relative duality-gap tolerance")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, rule=False, partition=True):
        sp.add_argument("--scenario", required=True, help="scenario JSON file or bundled name")
        sp.add_argument("--grid", type=_positive_int("--grid"), help="policy grid resolution m")
        sp.add_argument("--objective", choices=sorted(OBJECTIVES))
        if partition:
            sp.add_argument("--partition", type=_float_list("--partition"),
                            help="comma-separated partition factors")
        if rule:
            sp.add_argument("--rule", required=True, help="rule JSON file")

    def method(sp):
        sp.add_argument("--method", choices=["auto", "simplex", "highs"], default="auto")

    from .acl import DEFAULT_MAX_T, TAU_ACL
    from .obedience import DEFAULT_EPS

    sp = sub.add_parser("solve", help="solve the planner LP")
    common(sp)
    sp.add_argument("--k", type=_positive_int("--k"), help="number of equal groups")
    sp.add_argument("--out", help="write the optimal rule here")
    method(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="check obedience of a rule")
    common(sp, rule=True)
    sp.add_argument("--eps", type=float, default=DEFAULT_EPS)
    sp.add_argument("--atomic", action="store_true", help="finite-population check")
    sp.add_argument("--n", type=_positive_int("--n"), help="travelers for --atomic")
    sp.add_argument("--out", help="also write the JSON report here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="optimal value across partitions")
    common(sp, partition=False)
    sp.add_argument("--k", type=_positive_int("--k"), required=True)
    sp.add_argument("--step", type=_positive_float("--step"), default=0.05)
    sp.add_argument("--out", required=True, help="CSV output")
    sp.add_argument("--timing", action="store_true", help="fill the solve_ms column")
    method(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bpd", help="implementing partitions vs bounded partition disparity")
    common(sp, partition=False)
    sp.add_argument("--load", type=_float_list("--load"), required=True,
                    help="comma-separated expected edge loads")
    sp.add_argument("--k", type=_positive_int("--k"), required=True)
    sp.add_argument("--step", type=_positive_float("--step"), default=0.05)
    sp.add_argument("--out", required=True, help="CSV output")
    sp.set_defaults(func=cmd_bpd)

    sp = sub.add_parser("acl", help="path-loss characterization of obedience")
    common(sp, rule=True)
    sp.add_argument("--max-t", type=_positive_int("--max-t"), default=DEFAULT_MAX_T)
    sp.add_argument("--tau", type=_positive_float("--tau"), default=TAU_ACL)
    sp.add_argument("--eps", type=float, default=DEFAULT_EPS)
    sp.add_argument("--out", help="also write the JSON report here")
    sp.set_defaults(func=cmd_acl)

    sp = sub.add_parser("converge", help="atomic obedience gap versus population size")
    common(sp, rule=True)
    sp.add_argument("--n", type=_int_list("--n"), required=True, help="e.g. 4,16,64,256")
    sp.add_argument("--eps", type=float, default=DEFAULT_EPS)
    sp.add_argument("--out", required=True, help="CSV output")
    sp.add_argument("--timing", action="store_true", help="fill the eval_ms column")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("baselines", help="full-information, no-information and MP-BCWE values")
    common(sp)
    sp.add_argument("--k", type=_positive_int("--k"), help="number of equal groups")
    sp.add_argument("--out", help="also write the JSON here")
    method(sp)
    sp.set_defaults(func=cmd_baselines)

    sp = sub.add_parser("sample", help="draw (state, recommendation) realizations")
    common(sp, rule=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--count", type=_positive_int("--count"), default=10)
    sp.add_argument("--out", help="CSV of draws")
    sp.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    TOLERANCES.update(feasibility=args.tol_feasibility, optimality=args.tol_optimality,
                      duality=args.tol_duality)
    from .atomic import AdmissibleNError, GapCapError
    from .obedience import InvalidRuleError
    from .planner import PlannerCapError

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pslab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FormatError, ScenarioError, ModelError, PolicyError, InvalidRuleError,
            AdmissibleNError, OSError) as exc:
        print(f"pslab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (LpError, PlannerCapError, GapCapError, ValueError) as exc:
        print(f"pslab: analysis failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
