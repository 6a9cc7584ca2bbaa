"""Command-line entry point.

Every command writes a machine-readable JSON report (stdout or --out);
identical configurations, seeds included, produce byte-identical output.
Exit codes: 0 all asserted checks certified, 2 invalid usage, 3 undecided
certifications remain, 4 a check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from . import __version__
from .configgap import build_config_solution, sa1_defeats, verify_config_solution
from .instances import (InstanceError, build_config_lp_gap, build_depth3_example,
                        build_mmda, build_subtree_counterexample,
                        desiderata_identities, instance_from_json,
                        instance_to_json, make_params)
from .integral import bruteforce_best, counting_certificate
from .relaxations import (EnumerationCapExceeded, assignment_solution,
                          check_helper_lemma, closed_form_paths, count_paths,
                          path_solution, subtree_solutions, verify_assignment,
                          verify_path_hierarchy)
from .restricted import (build_lower_bound, integral_optimum, map_sa1_to_davies,
                         matching_lift, ra_instance_to_json,
                         verify_matching_distribution)
from .rounding import audit_locality, audit_to_json, sample_forest
from .scans import scan_proof_function
from .shadow import ConditionEvent, sa1_certificate, sample, shadow_model

SCHEMA_VERSION = 1

EXIT_PASS, EXIT_USAGE, EXIT_UNDECIDED, EXIT_FAIL = 0, 2, 3, 4


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _status(report_ok: bool, undecided: int = 0) -> tuple[str, int]:
    if undecided:
        return "undecided", EXIT_UNDECIDED
    return ("pass", EXIT_PASS) if report_ok else ("fail", EXIT_FAIL)


def _emit(args, payload: dict, code: int) -> int:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    if args.format == "csv":
        text = _to_csv(payload)
    else:
        text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def _to_csv(payload: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    rows = payload.get("checks") or payload.get("points") or []
    if rows:
        header = sorted({k for row in rows for k in row})
        writer.writerow(header)
        for row in rows:
            writer.writerow([json.dumps(row.get(k), sort_keys=True)
                             if isinstance(row.get(k), (dict, list))
                             else row.get(k) for k in header])
    else:
        writer.writerow(["key", "value"])
        for k in sorted(payload):
            writer.writerow([k, json.dumps(payload[k], sort_keys=True)])
    return buf.getvalue()


def _instance_from_args(args):
    path = getattr(args, "instance_file", None)
    if path:
        with open(path) as fh:
            data = json.load(fh)
        return instance_from_json(data.get("instance", data))
    kind = getattr(args, "kind", "mmda")
    if kind == "mmda":
        params = make_params(args.m, args.rho, epsilon=args.eps, ell=args.ell)
        return build_mmda(params, size_cap=args.size_cap)
    if kind == "config-gap":
        return build_config_lp_gap(args.k)
    if kind == "subtree-cex":
        return build_subtree_counterexample(args.k)
    if kind == "example":
        return build_depth3_example()
    raise InstanceError(f"unknown kind {kind!r}")


# --- commands ---------------------------------------------------------------


def cmd_build(args) -> int:
    inst = _instance_from_args(args)
    return _emit(args, {"command": "build", "instance": instance_to_json(inst)},
                 EXIT_PASS)


def cmd_verify_lp(args) -> int:
    inst = _instance_from_args(args)
    sol = assignment_solution(inst)
    rep = verify_assignment(inst, sol, allowance=args.allowance)
    identities = desiderata_identities(inst.params)
    subtree_failures = 0
    if args.subtrees:
        fam = subtree_solutions(inst)
        for f in inst.all_edges():
            sub = verify_assignment(inst, fam.solution_for(f), root=f[1])
            if not sub.ok:
                subtree_failures += 1
    ok = rep.ok and all(v for _, v in identities) and subtree_failures == 0
    status, code = _status(ok, len(rep.undecided))
    return _emit(args, {
        "command": "verify-lp",
        "status": status,
        "report": rep.to_json(),
        "identities": [{"name": n, "holds": v} for n, v in identities],
        "subtree_failures": subtree_failures,
        "checked_subtrees": bool(args.subtrees),
    }, code)


def cmd_verify_paths(args) -> int:
    inst = _instance_from_args(args)
    ps = path_solution(inst, args.rounds)
    rep = verify_path_hierarchy(inst, ps, mode=args.mode)
    status, code = _status(rep.ok, len(rep.undecided))
    return _emit(args, {"command": "verify-paths", "status": status,
                        "rounds": args.rounds, "mode": args.mode,
                        "report": rep.to_json()}, code)


def cmd_count_paths(args) -> int:
    inst = _instance_from_args(args)
    import random
    rng = random.Random(args.seed)
    mismatches = []
    checked = 0
    pairs = []
    if args.samples:
        for _ in range(args.samples):
            i = rng.randrange(0, inst.ell)
            j = rng.randrange(i, inst.ell + 1)
            v = (i, rng.randrange(inst.layer_size(i)))
            u = (j, rng.randrange(inst.layer_size(j)))
            pairs.append((v, u))
    else:
        vs = [v for i in range(inst.ell + 1) for v in inst.vertices(i)]
        pairs = [(v, u) for v in vs for u in vs if v[0] <= u[0]]
    for v, u in pairs:
        checked += 1
        dp = count_paths(inst, v, u)
        if inst.reachable(v, u):
            overlap = bin(inst.label(v) & inst.label(u)).count("1")
            cf = closed_form_paths(inst, v[0], u[0], overlap)
        else:
            cf = 0
        if dp != cf:
            mismatches.append({"v": list(v), "u": list(u), "dp": dp, "closed": cf})
    hl = check_helper_lemma(inst, args.xi)
    ok = not mismatches
    status, code = _status(ok, len(hl.report.undecided))
    return _emit(args, {
        "command": "count-paths", "status": status, "checked": checked,
        "mismatches": mismatches,
        "helper_bound": {"largest_distance": hl.largest_distance,
                         "xi_max": str(hl.xi_max),
                         "violations": len(hl.report.violations)},
    }, code)


def cmd_sa1_report(args) -> int:
    inst = _instance_from_args(args)
    model = shadow_model(inst)
    if args.events == "all":
        events = None
    else:
        events = []
        for i in range(1, inst.ell + 1):
            e = next(iter(inst.edges_into_layer(i)))
            events.extend([ConditionEvent(e, True), ConditionEvent(e, False)])
    res = sa1_certificate(model, args.floor, args.ceiling, events=events)
    payload = {
        "command": "sa1-report",
        "status": "pass" if res.passed else "fail",
        "events_checked": res.events_checked,
        "events_skipped": res.events_skipped,
        "min_covering_slack": scalar_json_frac(res.min_covering_slack),
        "max_packing_sum": scalar_json_frac(res.max_packing_sum),
        "worst_covering": _loc(res.worst_covering),
        "worst_packing": _loc(res.worst_packing),
    }
    return _emit(args, payload, EXIT_PASS if res.passed else EXIT_FAIL)


def scalar_json_frac(q):
    return None if q is None else {"exact": str(q), "approx": float(q)}


def _loc(t):
    return None if t is None else [str(x) for x in t]


def cmd_shadow_sample(args) -> int:
    inst = _instance_from_args(args)
    model = shadow_model(inst)
    events = []
    for i in range(1, inst.ell + 1):
        e = next(iter(inst.edges_into_layer(i)))
        events.append(ConditionEvent(e, True))
    emp = sample(model, args.seed, args.samples, rounds=args.rounds, events=events)
    worst = 0.0
    rows = []
    if args.exact:
        for e in emp.edges:
            ex = float(model.marginal(e))
            se = emp.marginal_se(e)
            dev = abs(emp.marginal(e) - ex) / se if se else 0.0
            worst = max(worst, dev)
        rows = [{"edge": str(e), "empirical": emp.marginal(e),
                 "exact": float(model.marginal(e))} for e in emp.edges[:20]]
    payload = {
        "command": "shadow-sample", "samples": args.samples, "seed": args.seed,
        "rounds": args.rounds,
        "worst_marginal_deviation_se": worst,
        "max_dev": args.max_dev,
        "head": rows,
        "status": "pass" if (not args.exact or worst <= args.max_dev) else "fail",
    }
    return _emit(args, payload, EXIT_PASS if payload["status"] == "pass" else EXIT_FAIL)


def cmd_bruteforce(args) -> int:
    inst = _instance_from_args(args)
    res = bruteforce_best(inst, budget=args.budget)
    payload = {
        "command": "bruteforce",
        "quality": {"exact": str(res.quality.alpha), "approx": float(res.quality.alpha)},
        "complete": res.complete,
        "nodes_used": res.nodes_used,
        "edges": sorted([[list(u), list(v)] for u, v in res.solution.edges]),
        "status": "pass" if res.complete else "undecided",
    }
    return _emit(args, payload, EXIT_PASS if res.complete else EXIT_UNDECIDED)


def cmd_certificate(args) -> int:
    inst = _instance_from_args(args)
    cert = counting_certificate(inst)
    payload = {"command": "certificate", "certificate": cert.to_json(),
               "status": "pass"}
    return _emit(args, payload, EXIT_PASS)


def cmd_locally_good(args) -> int:
    inst = _instance_from_args(args)
    audits = []
    zero_child_violations = 0
    for s in range(args.seeds):
        forest = sample_forest(inst, seed=args.seed + s)
        audit = audit_locality(forest, radius=args.radius)
        audits.append(audit_to_json(audit))
        if not audit.children_violations:
            zero_child_violations += 1
    payload = {
        "command": "locally-good", "seeds": args.seeds, "radius": args.radius,
        "zero_children_violation_rate": zero_child_violations / max(args.seeds, 1),
        "audits": audits,
        "status": "pass",
    }
    return _emit(args, payload, EXIT_PASS)


def cmd_ra(args) -> int:
    inst = build_lower_bound(args.k, args.eps)
    pairs = [(f"p{i+1}", f"b{i+1}") for i in range(args.cond)]
    rep = verify_matching_distribution(inst, pairs)
    davies_ok = None
    if args.alpha is not None:
        canon, y = matching_lift(args.k, args.eps, alpha=args.alpha)
        _, drep = map_sa1_to_davies(canon, y)
        davies_ok = drep.ok
    opt = None
    if args.k <= 6:
        opt_val, _ = integral_optimum(inst)
        opt = str(opt_val)
    ok = rep.meets_target and (davies_ok is not False)
    payload = {
        "command": "ra", "k": args.k, "eps": str(Fraction(args.eps)),
        "instance": ra_instance_to_json(inst),
        "conditioned": args.cond,
        "min_value": {"exact": str(rep.min_value), "approx": float(rep.min_value)},
        "meets_target": rep.meets_target,
        "davies_ok": davies_ok,
        "integral_optimum": opt,
        "status": "pass" if ok else "fail",
    }
    return _emit(args, payload, EXIT_PASS if ok else EXIT_FAIL)


def cmd_appendixb(args) -> int:
    inst = build_config_lp_gap(args.k)
    sol = build_config_solution(inst)
    rep = verify_config_solution(inst, sol)
    defeat = sa1_defeats(inst)
    ok = rep.ok and defeat.all_infeasible
    payload = {
        "command": "appendixb", "k": args.k,
        "config_solution": rep.summary(),
        "defeat": {str(v): {"infeasible": w.infeasible,
                            "demand": None if w.demand is None else str(w.demand),
                            "supply": w.supply}
                   for v, w in sorted(defeat.witnesses.items())},
        "status": "pass" if ok else "fail",
    }
    return _emit(args, payload, EXIT_PASS if ok else EXIT_FAIL)


def cmd_appendixc(args) -> int:
    inst = build_subtree_counterexample(args.k)
    res = bruteforce_best(inst, budget=args.budget)
    k = args.k
    bound = Fraction(int(k ** 0.5) + 1, k)
    ok = res.quality.alpha <= bound
    payload = {
        "command": "appendixc", "k": k,
        "quality": {"exact": str(res.quality.alpha), "approx": float(res.quality.alpha)},
        "bound": str(bound),
        "complete": res.complete,
        "status": "pass" if ok else "fail",
    }
    return _emit(args, payload, EXIT_PASS if ok else EXIT_FAIL)


def cmd_scan(args) -> int:
    rep = scan_proof_function(args.fn, args.lo, args.hi, args.points,
                              rho=args.rho, eps=args.eps_param)
    ok = rep.all_satisfied
    undecided = rep.undecided
    status, code = _status(ok, undecided)
    return _emit(args, {"command": "scan", "status": status, **rep.to_json()}, code)


# --- wiring -----------------------------------------------------------------


def _add_instance_args(sub, kinds=("mmda", "config-gap", "subtree-cex", "example")):
    sub.add_argument("--kind", choices=kinds, default="mmda")
    sub.add_argument("--instance-file", default=None,
                     help="load the instance from a build report instead")
    sub.add_argument("--m", type=int, default=8)
    sub.add_argument("--rho", type=parse_rational, default=Fraction(1, 4))
    sub.add_argument("--eps", type=parse_rational, default=None)
    sub.add_argument("--ell", type=int, default=None)
    sub.add_argument("--k", type=int, default=3)
    sub.add_argument("--size-cap", type=int, default=24)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mmda-lab",
        description="Build layered arborescence gap instances and certify "
                    "their relaxations, distributions, and integral bounds.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("build", help="emit an instance as JSON")
    _add_instance_args(p); common(p)
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("verify-lp", help="certify the assignment LP solution")
    _add_instance_args(p); common(p)
    p.add_argument("--allowance", type=parse_rational, default=Fraction(1))
    p.add_argument("--subtrees", action="store_true")
    p.set_defaults(handler=cmd_verify_lp)

    p = sub.add_parser("verify-paths", help="certify the path-hierarchy solution")
    _add_instance_args(p); common(p)
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--mode", choices=("auto", "symbolic", "enumerated"),
                   default="auto")
    p.set_defaults(handler=cmd_verify_paths)

    p = sub.add_parser("count-paths", help="path counting: dynamic program "
                                           "against the closed forms")
    _add_instance_args(p); common(p)
    p.add_argument("--samples", type=int, default=0,
                   help="0 = exhaustive over all vertex pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--xi", type=parse_rational, default=Fraction(1, 3))
    p.set_defaults(handler=cmd_count_paths)

    p = sub.add_parser("sa1-report", help="conditioned-constraint sweep of the "
                                          "shadow distribution")
    _add_instance_args(p); common(p)
    p.add_argument("--floor", type=parse_rational, default=Fraction(1, 100))
    p.add_argument("--ceiling", type=parse_rational, default=Fraction(8))
    p.add_argument("--events", choices=("all", "layers"), default="layers")
    p.set_defaults(handler=cmd_sa1_report)

    p = sub.add_parser("shadow-sample", help="Monte Carlo draws from the "
                                             "shadow distribution")
    _add_instance_args(p); common(p)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--max-dev", type=float, default=6.0,
                   help="largest tolerated |empirical - exact| in standard "
                        "errors over the all-edges sweep")
    p.add_argument("--exact", dest="exact", action="store_true", default=True)
    p.add_argument("--mc", dest="exact", action="store_false",
                   help="skip the exact-engine comparison")
    p.set_defaults(handler=cmd_shadow_sample)

    p = sub.add_parser("bruteforce", help="exact best integral solution")
    _add_instance_args(p); common(p)
    p.add_argument("--budget", type=int, default=2_000_000)
    p.set_defaults(handler=cmd_bruteforce)

    p = sub.add_parser("certificate", help="sink-accessibility counting bound")
    _add_instance_args(p); common(p)
    p.set_defaults(handler=cmd_certificate)

    p = sub.add_parser("locally-good", help="sample and audit path forests")
    _add_instance_args(p); common(p)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=int, default=1)
    p.set_defaults(handler=cmd_locally_good)

    p = sub.add_parser("ra", help="restricted-assignment matching distribution")
    common(p)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--eps", type=parse_rational, default=Fraction(1, 12))
    p.add_argument("--cond", type=int, default=0)
    p.add_argument("--alpha", type=parse_rational, default=None)
    p.set_defaults(handler=cmd_ra)

    p = sub.add_parser("appendixb", help="bundle solution and its defeat")
    common(p)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(handler=cmd_appendixb)

    p = sub.add_parser("appendixc", help="shared-sink counterexample bound")
    common(p)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--budget", type=int, default=2_000_000)
    p.set_defaults(handler=cmd_appendixc)

    p = sub.add_parser("scan", help="certified sign scan of a proof function")
    common(p)
    p.add_argument("--fn", required=True)
    p.add_argument("--lo", type=parse_rational, required=True)
    p.add_argument("--hi", type=parse_rational, required=True)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--rho", type=parse_rational, default=Fraction(1, 1000))
    p.add_argument("--eps-param", type=parse_rational, default=Fraction(1, 100))
    p.set_defaults(handler=cmd_scan)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.handler(args)
    except (InstanceError, EnumerationCapExceeded, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
