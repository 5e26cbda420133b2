"""Command-line entry point: ``smoothpd <command> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import generators as gen
from . import harness
from . import schema
from .apps import energy as en
from .apps import facility as fl
from .apps import routing as rt
from .apps import vecsched as vs
from .core import InputError, SizeError, competitive_ratio, tolerance
from .costlib import cost_from_json, covering_log, params_for
from .covering import check_covering_dual, derived_bound, row_satisfied, solve_online
from .greedy import check_dual_feasibility, run_online
from .multilinear import Sampled, eval_F, grad_all
from .oracle import fractional_opt_grid, offline_opt_general
from .smoothness import SmoothnessParams, compute_poly_params, verify_local_smoothness, verify_smoothness


def _out(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_default))


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _fin(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def _params(args, fallback=None) -> SmoothnessParams:
    if args.lam is not None:
        return SmoothnessParams(args.lam, args.mu, "asserted")
    if fallback is None:
        raise InputError("--lambda is required")
    return fallback


def cmd_greedy_run(args) -> int:
    inst = schema.general_from_json(schema.load_json(args.instance))
    degree = max((getattr(f, "degree", 1) for f in inst.costs.values()), default=1)
    params = _params(args, compute_poly_params(max(degree, 1)))
    _, state, cert = run_online(inst, params)
    report = {"primal": state.primal, "dual": cert.dual, "bound": params.ratio,
              "lambda": params.lam, "mu": params.mu, "assignment": {str(k): v for k, v in state.choice.items()}}
    status = 0
    if args.check_dual:
        try:
            res = check_dual_feasibility(inst, cert, n_max=args.n_max)
            report["feasible"] = bool(res)
            if not res:
                report["violation"] = {"constraint": res.constraint, "where": res.where, "slack": res.slack}
                status = 1
        except SizeError as exc:
            report["feasible"] = harness.SKIPPED
            print(f"{harness.SKIPPED}: dual check ({exc})", file=sys.stderr)
    if args.oracle:
        opt, _ = offline_opt_general(inst)
        report["opt"], report["ratio"] = opt, _fin(competitive_ratio(state.primal, opt))
    _out(report)
    return status


def cmd_cover_run(args) -> int:
    f, n, rows = schema.covering_from_json(schema.load_json(args.instance))
    if args.rows:
        rows = list(schema.read_rows(args.rows))
    d = args.d or max((len(r.b) for r in rows), default=1)
    params = _params(args, None) if args.lam is not None else params_for(f, d)
    state, cert, lemma_ok, _ = solve_online(f, n, rows, params, d=d, dtau=args.dtau, lemma_tol=args.lemma_tol)
    mu_thm = params.mu * 8 * covering_log(d)
    report = {
        "x": state.x, "primal": cert.primal, "dual": cert.dual,
        "bound_expr": "O(lambda/(1-mu) * ln d)",
        "bound_derived": derived_bound(params.lam, mu_thm, d),
        "x_bound_ok": bool(lemma_ok), "rows_satisfied": all(row_satisfied(state, r) for r in rows),
        "lambda": params.lam, "mu": params.mu,
    }
    try:
        report["feasible_dual"] = bool(check_covering_dual(state, f, cert))
    except SizeError as exc:
        report["feasible_dual"] = harness.SKIPPED
        print(f"{harness.SKIPPED}: dual check ({exc})", file=sys.stderr)
    if args.oracle and rows:
        fo = fractional_opt_grid(f, rows, n)
        report["opt_grid"], report["opt_lower"] = fo.value, fo.lower_bound
        report["ratio"] = _fin(competitive_ratio(cert.primal, fo.lower_bound))
    _out(report)
    return 0


def cmd_app_run(args) -> int:
    data = schema.load_json(args.instance)
    inst = schema.APP_READERS[args.kind](data)
    report = {"kind": args.kind}
    if args.kind == "routing":
        paths, loads, total = rt.run_routing(inst)
        report.update(paths=paths, loads=loads, primal=total, bound=compute_poly_params(2).ratio)
        if args.oracle:
            report["opt"] = offline_opt_general(rt.to_general(inst))[0]
    elif args.kind == "vecsched":
        assignment, val = vs.run_vecsched(inst)
        report.update(assignment=assignment, primal=val, q=inst.degree, bound=vs.vecsched_bound(inst))
        if args.oracle:
            report["opt"] = vs.vecsched_opt(inst)[0]
    elif args.kind in ("energy", "prize"):
        alpha = inst.power[0].alpha if hasattr(inst.power[0], "alpha") else 2
        params = compute_poly_params(max(1, int(math.ceil(alpha))))
        prize = args.kind == "prize"
        state = en.run_energy(inst, params.lam, prize=prize)
        report.update(
            assignment={str(k): v for k, v in state.assignment.items()},
            primal=en.total_energy(inst, state) + state.penalties, penalties=state.penalties, bound=params.ratio,
        )
        if args.oracle:
            report["opt"] = en.energy_opt(inst, prize=prize)
    else:
        params = compute_poly_params(2)
        state = fl.run_facility(inst, params, args.gamma_scale)
        report.update(
            assignment={str(k): v for k, v in state.assignment.items()},
            primal=fl.facility_cost(inst, state.assignment),
            reference=fl.facility_reference_bound(len(inst.clients), params),
        )
        if args.oracle:
            report["opt"] = fl.facility_opt(inst)[0]
    if "opt" in report:
        report["ratio"] = _fin(competitive_ratio(report["primal"], report["opt"]))
    _out(report)
    return 0


def _cost_and_ground(data, n: int):
    if "cost" in data:
        f = cost_from_json(data["cost"])
        ground = data.get("ground", list(range(n)))
    else:
        f, ground = cost_from_json(data), list(range(n))
    if isinstance(ground, dict):
        ground = {int(k): float(v) for k, v in ground.items()}
    return f, ground


def cmd_smoothness_verify(args) -> int:
    f, ground = _cost_and_ground(schema.load_json(args.instance), args.n)
    params = SmoothnessParams(args.lam, args.mu, "asserted")
    verify = verify_local_smoothness if args.local else verify_smoothness
    res = verify(f, ground, params)
    if res:
        print("HOLDS")
        return 0
    _out({"holds": False, "witness": res.witness, "lhs": res.lhs, "rhs": res.rhs})
    return 1


def cmd_costlib_params(args) -> int:
    data = schema.load_json(args.cost)
    f = cost_from_json(data.get("cost", data))
    p = params_for(f, args.d)
    _out({"lambda": p.lam, "mu": p.mu, "provenance": p.provenance})
    return 0


def cmd_oracle(args) -> int:
    data = schema.load_json(args.instance)
    if "resources" in data:
        value, assignment = offline_opt_general(schema.general_from_json(data))
        _out({"opt": value, "argmin": {str(k): v for k, v in assignment.items()}})
    elif "cost" in data and "n" in data:
        f, n, rows = schema.covering_from_json(data)
        if args.rows:
            rows = list(schema.read_rows(args.rows))
        fo = fractional_opt_grid(f, rows, n, resolution=1.0 / args.grid)
        _out({"opt": fo.value, "argmin": fo.x, "lower_bound": fo.lower_bound,
              "integral": fo.integral, "integral_argmin": fo.integral_x, "resolution": fo.resolution})
    else:
        kind = data.get("kind")
        if kind == "routing":
            v, a = offline_opt_general(rt.to_general(schema.routing_from_json(data)))
            _out({"opt": v, "argmin": {str(k): s for k, s in a.items()}})
        elif kind == "vecsched":
            v, a = vs.vecsched_opt(schema.vecsched_from_json(data))
            _out({"opt": v, "argmin": a})
        elif kind == "energy":
            _out({"opt": en.energy_opt(schema.energy_from_json(data), prize=args.prize)})
        elif kind == "facility":
            v, a = fl.facility_opt(schema.facility_from_json(data))
            _out({"opt": v, "argmin": a})
        else:
            raise InputError("unrecognised instance")
    return 0


def cmd_generate(args) -> int:
    k, s = args.kind, args.seed
    if k == "general":
        obj = schema.general_to_json(gen.general(args.n, args.m, args.strategies, args.degree, s))
    elif k == "covering":
        f, n, rows = gen.covering(args.family, args.n, args.m, args.d, s)
        obj = schema.covering_to_json(f, n, rows)
    elif k == "routing":
        obj = schema.routing_to_json(gen.routing(args.nodes, args.m, args.n, 2, s))
    elif k == "vecsched":
        alpha = math.inf if args.alpha == "inf" else float(args.alpha)
        obj = schema.vecsched_to_json(gen.vecsched(args.n, args.m, args.d, alpha, s))
    elif k in ("energy", "prize"):
        obj = schema.energy_to_json(gen.energy(args.n, args.m, alpha=float(args.alpha), prize=k == "prize", seed=s))
    else:
        obj = schema.facility_to_json(gen.facility(args.nodes, args.m, args.n, s))
    text = schema.dump_json(obj)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _read_config(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".json") or text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
    # key=value lines describe a single experiment
    exp = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"malformed config line {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            exp[key] = json.loads(value)
        except json.JSONDecodeError:
            exp[key] = value
    return {"experiments": [exp]}


def cmd_experiment(args) -> int:
    config = _read_config(args.config)
    if args.check_dual:
        for e in config.get("experiments", []):
            e["check_dual"] = True
    rows = harness.run_experiments(config, workers=args.workers)
    csv_text = harness.to_csv(rows, timing=args.timing)
    Path(args.csv).write_text(csv_text)
    if args.json:
        Path(args.json).write_text(json.dumps({"rows": rows, "tolerance": tolerance()}, indent=2, sort_keys=True,
                                              default=_default) + "\n")
    failed = [r for r in rows if r["failures"]]
    for r in rows:
        if r.get("dual_feasible") == harness.SKIPPED:
            print(f"{harness.SKIPPED}: {r['experiment']} seed {r['seed']} dual check above n_max", file=sys.stderr)
    for r in failed:
        print(f"FAIL: {r['experiment']} seed {r['seed']}: {', '.join(r['failures'])}", file=sys.stderr)
    print(f"{len(rows)} rows, {len(failed)} with failed invariants")
    return 1 if failed else 0


def cmd_mlext_eval(args) -> int:
    data = schema.load_json(args.cost)
    f = cost_from_json(data.get("cost", data))
    x = np.array([float(v) for v in args.x.split(",")])
    mode = Sampled(args.samples, args.seed) if args.samples else "auto"
    _out({"F": eval_F(f, x, mode), "grad": grad_all(f, x, mode)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothpd", description="Online primal-dual algorithms for non-linear costs.")
    sub = p.add_subparsers(dest="command", required=True)

    def lam_mu(q, required=False):
        q.add_argument("--lambda", dest="lam", type=float, required=required)
        q.add_argument("--mu", type=float, default=0.0)

    g = sub.add_parser("greedy").add_subparsers(dest="action", required=True).add_parser("run")
    g.add_argument("--instance", required=True)
    lam_mu(g)
    g.add_argument("--check-dual", action="store_true")
    g.add_argument("--oracle", action="store_true")
    g.add_argument("--n-max", type=int, default=12)
    g.set_defaults(func=cmd_greedy_run)

    c = sub.add_parser("cover").add_subparsers(dest="action", required=True).add_parser("run")
    c.add_argument("--instance", required=True)
    c.add_argument("--rows", help="JSON-lines row stream; overrides rows inside the instance")
    c.add_argument("--dtau", type=float, default=1e-4)
    c.add_argument("--d", type=int)
    c.add_argument("--lemma-tol", type=float, default=1e-2)
    c.add_argument("--oracle", action="store_true")
    lam_mu(c)
    c.set_defaults(func=cmd_cover_run)

    a = sub.add_parser("app").add_subparsers(dest="action", required=True).add_parser("run")
    a.add_argument("--kind", required=True, choices=["routing", "vecsched", "energy", "prize", "facility"])
    a.add_argument("--instance", required=True)
    a.add_argument("--oracle", action="store_true")
    a.add_argument("--gamma-scale", type=float, default=1.0)
    a.set_defaults(func=cmd_app_run)

    s = sub.add_parser("smoothness").add_subparsers(dest="action", required=True).add_parser("verify")
    s.add_argument("--instance", required=True, help="cost JSON, optionally {cost, ground}")
    lam_mu(s, required=True)
    s.add_argument("--n", type=int, default=8, help="ground size when the instance gives none")
    s.add_argument("--local", action="store_true", help="check local (gradient) smoothness instead")
    s.set_defaults(func=cmd_smoothness_verify)

    cp = sub.add_parser("costlib").add_subparsers(dest="action", required=True).add_parser("params")
    cp.add_argument("--cost", required=True)
    cp.add_argument("--d", type=int)
    cp.set_defaults(func=cmd_costlib_params)

    o = sub.add_parser("oracle")
    o.add_argument("--instance", required=True)
    o.add_argument("--rows")
    o.add_argument("--grid", type=int, default=40)
    o.add_argument("--prize", action="store_true")
    o.set_defaults(func=cmd_oracle)

    gn = sub.add_parser("generate")
    gn.add_argument("kind", choices=["general", "covering", "routing", "vecsched", "energy", "prize", "facility"])
    gn.add_argument("--seed", type=int, default=0)
    gn.add_argument("--n", type=int, default=5, help="requests / coordinates / jobs / clients")
    gn.add_argument("--m", type=int, default=4, help="resources / rows / edges / machines / facilities")
    gn.add_argument("--d", type=int, default=2)
    gn.add_argument("--nodes", type=int, default=6)
    gn.add_argument("--strategies", type=int, default=4)
    gn.add_argument("--degree", type=int, default=2)
    gn.add_argument("--family", default="polynomial")
    gn.add_argument("--alpha", default="2")
    gn.add_argument("--out")
    gn.set_defaults(func=cmd_generate)

    e = sub.add_parser("experiment")
    e.add_argument("config")
    e.add_argument("--csv", default="results.csv")
    e.add_argument("--json")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--timing", action="store_true", help="fill runtime_ms (makes the CSV run-dependent)")
    e.add_argument("--check-dual", action="store_true")
    e.set_defaults(func=cmd_experiment)

    m = sub.add_parser("mlext").add_subparsers(dest="action", required=True).add_parser("eval")
    m.add_argument("--cost", required=True)
    m.add_argument("--x", required=True, help="comma-separated point")
    m.add_argument("--samples", type=int, default=0)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_mlext_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, SizeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
