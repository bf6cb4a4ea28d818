"""Command-line interface: ``paramshap shap|whynot|check|gen|esim``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction

from .data import guess_value, load_database, parse_value, write_database
from .distributions import FactorizedDistribution, load_distribution
from .errors import ComputationError, InputError, ParamShapError
from .evaluation import DEFAULT_BUDGET_ROWS, DEFAULT_FILTER_ARITY, materialize_filters
from .gallery import PosDnf, gen_dnf_instance, gen_ineq_instance, gen_setcover_instance
from .hypergraph import gyo_reduce, hypergraph
from .query import Const, Param, Var, load_query, parse_query
from .shap import ShapTask, compute_shap, esim, exact_applicable
from .similarity import parse_similarity
from .whynot import WhyNotInstance, compute_whynot

EXIT_OK, EXIT_COMPUTE, EXIT_INPUT = 0, 1, 2


def _add_query_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--query", help="query file")
    g.add_argument("--query-str", help="query text")
    p.add_argument("--filter-arity-max", type=int, default=DEFAULT_FILTER_ARITY)


def _add_data_args(p):
    p.add_argument("--schema", required=True, help="schema descriptor (JSON)")
    p.add_argument("--data", required=True, help="directory with one CSV per relation")
    p.add_argument("--budget-rows", type=int, default=DEFAULT_BUDGET_ROWS)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of a table")


def _add_param_args(p):
    p.add_argument("--dist", required=True, help="distribution file (JSON)")
    p.add_argument("--reference", required=True, help="reference parameter values, comma separated")
    p.add_argument("--similarity", default="jaccard")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paramshap", description="Shapley attribution for query parameters and filters")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shap", help="SHAP score of each query parameter")
    _add_query_args(p)
    _add_data_args(p)
    _add_param_args(p)
    p.add_argument("--method", choices=["auto", "exact", "brute", "mc"], default="auto")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--bounds", help="a,b bounds of the similarity for Monte Carlo")

    p = sub.add_parser("esim", help="expected similarity to the reference output")
    _add_query_args(p)
    _add_data_args(p)
    _add_param_args(p)
    p.add_argument("--method", choices=["auto", "exact", "brute"], default="auto")

    p = sub.add_parser("whynot", help="Shapley ranking of filters for a missing tuple")
    _add_query_args(p)
    _add_data_args(p)
    p.add_argument("--tuple", required=True, help="values of the missing tuple, comma separated; _ = undefined")
    p.add_argument("--utility", choices=["size", "qual"], default="size")
    p.add_argument("--method", choices=["auto", "closed", "acyclic", "brute"], default="auto")

    p = sub.add_parser("check", help="structural report on a query")
    _add_query_args(p)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("gen", help="emit a reduction instance as files")
    p.add_argument("--kind", choices=["dnf", "ineq", "setcover"], required=True)
    p.add_argument("--spec", required=True, help='JSON, e.g. {"ell":3,"disjuncts":[[1,2],[3]]} or {"m":3,"sets":[[1,2],[3]]}')
    p.add_argument("--out", required=True, help="output directory")
    return parser


# --- input helpers ---------------------------------------------------------------

def _query(args):
    q = load_query(args.query) if args.query else parse_query(args.query_str)
    return q.validate(args.filter_arity_max)


def _position_kinds(q, db):
    """Kinds of the columns where each variable/parameter key occurs."""
    kinds = {}
    for a in q.atoms:
        if a.relation not in db:
            continue
        cols = db[a.relation].schema.columns
        if len(cols) != len(a.terms):
            continue
        for t, (_, kind) in zip(a.terms, cols):
            if not isinstance(t, Const) and kind is not None:
                kinds.setdefault(t.key, kind)
    return kinds


def _parse_values(text, keys, kinds, allow_undefined=False):
    parts = [] if text == "" else [s.strip() for s in text.split(",")]
    if len(parts) != len(keys):
        raise InputError(f"expected {len(keys)} comma-separated values, got {len(parts)}")
    out = []
    for s, key in zip(parts, keys):
        if allow_undefined and s == "_":
            out.append(None)
            continue
        if len(s) >= 2 and s[0] == s[-1] == '"':
            out.append(s[1:-1])
            continue
        kind = kinds.get(key)
        try:
            out.append(parse_value(s, kind) if kind else guess_value(s))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"cannot parse {s!r} as {kind}") from None
    return tuple(out)


def _task(args, q, db):
    kinds = _position_kinds(q, db)
    dist = load_distribution(args.dist, q.params, {p: kinds.get("$" + p) for p in q.params})
    p_star = _parse_values(args.reference, ["$" + p for p in q.params], kinds)
    sim = parse_similarity(args.similarity)
    return ShapTask(q, db, p_star, dist, sim, args.budget_rows, filter_arity_max=args.filter_arity_max)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _emit(args, report: dict, table_lines):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    if getattr(args, "json", False):
        print(json.dumps(report, indent=2))
    else:
        for line in table_lines:
            print(line)
        for w in report.get("warnings", []):
            print(f"warning: {w}", file=sys.stderr)


# --- commands --------------------------------------------------------------------

def cmd_shap(args) -> dict:
    q = _query(args)
    db = load_database(args.schema, args.data)
    task = _task(args, q, db)
    bounds = None
    if args.bounds:
        a, b = (Fraction(x) for x in args.bounds.split(","))
        bounds = (a, b)
    start = time.perf_counter()
    res = compute_shap(task, args.method, args.epsilon, args.delta, args.seed, bounds, args.threads)
    elapsed = time.perf_counter() - start
    report = {
        "command": "shap",
        "inputs": _inputs(args),
        **res.as_dict(),
        "timing_seconds": round(elapsed, 6),
        "warnings": res.warnings,
    }
    lines = [f"method: {res.method}"]
    if res.method == "mc":
        lines.append(f"epsilon={res.epsilon} delta={res.delta} samples per side={res.samples}")
    lines.append(f"{'parameter':<16} score")
    lines += [f"${p:<15} {_fmt(s)}" for p, s in zip(res.params, res.scores)]
    _emit(args, report, lines)
    return report


def cmd_esim(args) -> dict:
    q = _query(args)
    db = load_database(args.schema, args.data)
    task = _task(args, q, db)
    method = {"brute": "enumerate"}.get(args.method, args.method)
    start = time.perf_counter()
    value = esim(task, method)
    report = {
        "command": "esim",
        "inputs": _inputs(args),
        "method": "exact" if method != "enumerate" and exact_applicable(task) is None else "enumerate",
        "esim": str(value),
        "timing_seconds": round(time.perf_counter() - start, 6),
        "warnings": [],
    }
    _emit(args, report, [f"expected similarity: {value}"])
    return report


def cmd_whynot(args) -> dict:
    q = _query(args)
    db = load_database(args.schema, args.data)
    kinds = _position_kinds(q, db)
    t = _parse_values(args.tuple, list(q.free), kinds, allow_undefined=True)
    inst = WhyNotInstance(q, db, t, args.budget_rows, args.filter_arity_max)
    start = time.perf_counter()
    res = compute_whynot(inst, args.utility, args.method)
    report = {
        "command": "whynot",
        "inputs": _inputs(args),
        **res.as_dict(),
        "timing_seconds": round(time.perf_counter() - start, 6),
        "warnings": [],
    }
    lines = [f"method: {res.method}  utility: {res.utility}", f"{'#':<3} {'score':<10} filter"]
    lines += [f"{k:<3} {_fmt(s):<10} {f}" for k, (f, s) in enumerate(zip(res.filters, res.scores))]
    _emit(args, report, lines)
    return report


def cmd_check(args) -> dict:
    q = _query(args)
    with_f = gyo_reduce(hypergraph(q, True, True))
    without_f = gyo_reduce(hypergraph(q, True, False))
    report = {
        "command": "check",
        "query": str(q),
        "parameters": list(q.params),
        "free": list(q.free),
        "bound": list(q.bound),
        "full": q.is_full,
        "boolean": q.is_boolean,
        "p_acyclic": with_f.acyclic,
        "p_acyclic_without_filters": without_f.acyclic,
        "cycle": list(with_f.residual),
        "guarded": True,
        "filter_arities": [f.arity for f in q.filters],
        "null_parameters": q.null_parameters(),
    }
    status = "p-acyclic" if with_f.acyclic else f"not p-acyclic (stuck at {' - '.join(with_f.residual)})"
    lines = [
        f"{'full' if q.is_full else 'not full'}, {status}",
        f"without filters as edges: {'p-acyclic' if without_f.acyclic else 'not p-acyclic'}",
        f"parameters: {', '.join('$' + p for p in q.params) or '-'}",
        f"filter arities: {report['filter_arities'] or '-'}",
    ]
    if report["null_parameters"]:
        lines.append("null-player parameters: " + ", ".join("$" + p for p in report["null_parameters"]))
    _emit(args, report, lines)
    return report


def cmd_gen(args) -> dict:
    try:
        spec = json.loads(args.spec)
    except json.JSONDecodeError as exc:
        raise InputError(f"--spec is not valid JSON: {exc}") from None
    out = args.out
    os.makedirs(out, exist_ok=True)
    if args.kind in ("dnf", "ineq"):
        phi = PosDnf(int(spec["ell"]), tuple(frozenset(x - 1 for x in d) for d in spec["disjuncts"]))
        task = (gen_dnf_instance if args.kind == "dnf" else gen_ineq_instance)(phi)
        query, db = task.query, task.database
        with open(os.path.join(out, "dist.json"), "w", encoding="utf-8") as fh:
            json.dump(task.dist.to_json(query.params), fh, indent=2)
        meta = {"kind": args.kind, "reference": ",".join(str(v) for v in task.p_star),
                "similarity": str(task.similarity), "model_count": phi.count_models()}
    else:
        inst = gen_setcover_instance(int(spec["m"]), [frozenset(s) for s in spec["sets"]])
        query, db = inst.query, inst.database
        meta = {"kind": "setcover", "tuple": ""}
    with open(os.path.join(out, "query.txt"), "w", encoding="utf-8") as fh:
        fh.write(str(query) + "\n")
    write_database(db, os.path.join(out, "schema.json"), os.path.join(out, "data"))
    with open(os.path.join(out, "instance.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    report = {"command": "gen", "kind": args.kind, "out": out, **meta}
    print(f"wrote {args.kind} instance to {out}")
    return report


def _inputs(args) -> dict:
    keys = ["query", "query_str", "schema", "data", "dist", "reference", "similarity", "method",
            "epsilon", "delta", "seed", "tuple", "utility"]
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


COMMANDS = {"shap": cmd_shap, "esim": cmd_esim, "whynot": cmd_whynot, "check": cmd_check, "gen": cmd_gen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except KeyError as exc:
        print(f"error: missing field {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
