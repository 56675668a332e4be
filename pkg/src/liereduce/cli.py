"""Command-line front end: classify, reduce, chain, paths, derive-families, verify."""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import sympy as sp

from . import families, numeric, parse
from .expr import X, total_derivative, canonicalize
from .lie import AlgebraError, UnsupportedClass, classify_2d, is_symmetry
from .reduce import (
    NotASymmetry,
    ReductionError,
    ReductionStep,
    enumerate_paths,
    format_skeleton,
    reduce_chain,
    reduce_once,
)

log = logging.getLogger("liereduce")

DEFAULT_NAMES = ("X", "Y", "Z", "U", "V", "W")


class Rejected(Exception):
    """Mathematical rejection: exit status 1."""


def _generators(specs: list[str]):
    gens = []
    for i, spec in enumerate(specs or []):
        name, eq, body = spec.partition("=")
        if eq and re.fullmatch(r"\s*[A-Za-z_]\w*\s*", name) and "d/d" not in name:
            name, text = name.strip(), body
        else:
            name, text = (DEFAULT_NAMES[i] if i < len(DEFAULT_NAMES) else f"G{i + 1}"), spec
        gens.append(parse.parse_vector_field(text, name))
    return gens


def _unknowns(decls: list[str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for d in decls or []:
        for part in d.split(","):
            out.update(parse.parse_unknown_decl(part.strip()))
    return out


def _problem(args):
    if getattr(args, "input", None):
        prob = parse.parse_problem(Path(args.input).read_text())
        gens = prob.generators + _generators(args.sym)
        return prob.ode, gens
    if not args.ode:
        raise parse.ParseError("an equation is required (--ode or --input)", 1, 1)
    ode = parse.parse_ode(args.ode, _unknowns(args.unknown))
    return ode, _generators(args.sym)


def _check_symmetries(ode, gens):
    for g in gens:
        if not is_symmetry(g, ode):
            raise Rejected(f"{g.name} = {g} is not a symmetry of {parse.format_ode(ode)}")


def _instantiation(specs: list[str]) -> dict[str, sp.Lambda]:
    """'F(s) = s^2' or 'F = s^2' (argument named s)."""
    out = {}
    for spec in specs or []:
        m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*(?:\(\s*([A-Za-z_]\w*)\s*\))?\s*=(.*)", spec)
        if not m:
            raise parse.ParseError(f"bad instantiation {spec!r}", 1, 1)
        name, var, body = m.group(1), m.group(2) or "s", m.group(3)
        body = re.sub(rf"\b{re.escape(var)}\b", "x", body)
        out[name] = sp.Lambda(X, parse.parse_expression(body))
    return out


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_classify(args) -> int:
    ode, gens = _problem(args)
    if len(gens) != 2:
        raise parse.ParseError("classify needs exactly two generators", 1, 1)
    _check_symmetries(ode, gens)
    kind = classify_2d(*gens)
    fam = families.match_family(ode, *gens) if ode.order == 3 else None
    if args.json:
        print(json.dumps({"type": kind.tag, "family": None if fam is None else str(fam)}))
    else:
        print(f"Type {kind.tag}, " + (f"family {fam}" if fam else "no Case-1 family"))
    return 0


def _step_text(step) -> str:
    lines = [
        f"level {step.level}: reduce by {step.generator.name} = {step.generator}",
        f"  u = {parse.format_expression(step.u)}",
        f"  v = {parse.format_expression(step.v)}",
        f"  child: {parse.format_ode(step.child)}",
    ]
    for s in step.statuses:
        tail = f"  {s.restriction}" if s.restriction is not None else ""
        note = f"  ({s.note})" if s.note else ""
        lines.append(f"  {s.name:<8} {s.status:<16}{tail}{note}")
    return "\n".join(lines)


def cmd_reduce(args) -> int:
    ode, gens = _problem(args)
    _check_symmetries(ode, gens)
    by = [g for g in gens if g.name == args.by] if args.by else gens[:1]
    if not by:
        raise parse.ParseError(f"no generator named {args.by!r}", 1, 1)
    step = reduce_once(ode, by[0], [g for g in gens if g is not by[0]])
    if args.json:
        doc = parse.trace_document(_single_path(ode, step))
        _write(json.dumps(doc, indent=2) + "\n", args.output)
    else:
        _write(_step_text(step) + "\n", args.output)
    return 0


def _single_path(ode, step):
    from .reduce import ReductionPath

    return ReductionPath(ode, [step], step.restrictions())


def cmd_chain(args) -> int:
    ode, gens = _problem(args)
    _check_symmetries(ode, gens)
    order = [s.strip() for s in args.order.split(",")] if args.order else None
    path = reduce_chain(ode, gens, order, detect=not args.no_detect,
                        degree_bound=args.degree, allow_inverse=not args.no_inverse)
    trace = parse.emit_trace(path)
    if args.output:
        Path(args.output).write_text(trace)
    if args.json:
        sys.stdout.write(trace)
        return 0
    print(f"source: {parse.format_ode(ode)}")
    for step in path.steps:
        print(_step_text(step))
    print(f"terminal: {parse.format_ode(path.terminal)}")
    for s in path.terminal_symmetries:
        print(f"  {s.name} = {s}")
    print("quadrature-complete" if path.quadrature_complete else "not quadrature-complete")
    return 0


def cmd_paths(args) -> int:
    text = Path(args.table).read_text() if Path(args.table).exists() else args.table.replace(";", "\n")
    table = parse.parse_commutator_table(text)
    skeletons = enumerate_paths(table, args.source_order)
    if args.json:
        doc = [
            {
                "reducers": list(p.reducers),
                "quadrature_complete": p.quadrature_complete,
                "marked": p.marked,
                "levels": [
                    {"order": lv.order, "reducer": lv.reducer, "inherited": list(lv.inherited),
                     "new": list(lv.new), "nonlocal": list(lv.nonlocal_)}
                    for lv in p.levels
                ],
            }
            for p in skeletons
        ]
        print(json.dumps(doc, indent=2))
        return 0
    for p in skeletons:
        print(format_skeleton(p))
    return 0


def cmd_derive_families(args) -> int:
    out = []
    for a in families.ALGEBRA_TAGS:
        for r in families.ROW_TAGS:
            t = families.derive_family_template(a, r)
            if isinstance(t, families.Rejection):
                out.append({"family": str(t.family), "rejected": t.reason,
                            "ode": parse.format_ode(t.ode)})
            else:
                x_hat, y_hat = t.pair
                out.append({"family": str(t.family), "ode": parse.format_ode(t.ode),
                            "X": parse.format_vector_field(x_hat), "Y": parse.format_vector_field(y_hat),
                            "reduced": parse.format_ode(t.reduced),
                            "extra_symmetries": max(0, len(t.symmetries) - 2)})
    if args.json:
        print(json.dumps(out, indent=2))
        return 0
    for item in out:
        if "rejected" in item:
            print(f"{item['family']:<5} rejected: {item['rejected']}  [{item['ode']}]")
        else:
            print(f"{item['family']:<5} {item['ode']}    # X = {item['X']}, Y = {item['Y']}")
    return 0


def _tower(u, v, n):
    invs = [canonicalize(u), canonicalize(v)]
    du = total_derivative(u)
    for _ in range(n - 1):
        invs.append(canonicalize(total_derivative(invs[-1]) / du))
    return invs


def _steps_from_trace(doc: dict, inst) -> list[ReductionStep]:
    steps = []
    for st in doc["steps"]:
        parent = st["equation"].instantiate(inst)
        child = st["child"].instantiate(inst)
        invs = _tower(st["u"], st["v"], parent.order)
        steps.append(ReductionStep(st["level"], parent, st["generator"], invs[0], invs[1], invs, child, []))
    return steps


def cmd_verify(args) -> int:
    text = Path(args.trace).read_text()
    doc = parse.load_trace(text)
    inst = _instantiation(args.instantiate)
    source = doc["source"]
    missing = set(source.unknowns) - set(inst)
    if missing:
        raise parse.ParseError(f"instantiate {', '.join(sorted(missing))} with --instantiate", 1, 1)
    ode = source.instantiate(inst)
    a, b = args.interval
    x0 = args.x0 if args.x0 is not None else a
    jets0 = tuple(float(sp.sympify(v)) for v in args.jets.split(",")) if args.jets else (1.0,) * ode.order
    prob = numeric.NumericProblem(ode, x0, jets0, (a, b), args.step)
    samples = numeric.integrate(prob)
    reports = []
    cur = samples
    for step in _steps_from_trace(doc, inst):
        if step.level == 1:
            reports.append(numeric.check_symmetry_flow(step.generator, prob, samples=samples))
        rep, cur = numeric.check_step(step, cur)
        reports.append(rep)
    checks = [r.as_dict() for r in reports]
    for c in checks:
        print(f"{c['result']}  {c['check']:<28} max residual {c['max_residual']:.3e} (< {c['threshold']:g})")
    if args.figures:
        from .report import write_reports

        for path in write_reports(reports, args.figures):
            log.info("wrote %s", path)
    if args.output:
        raw = json.loads(text)
        raw["numeric_checks"] = checks
        Path(args.output).write_text(json.dumps(raw, indent=2) + "\n")
    return 0 if all(r.passed for r in reports) else 1


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liereduce", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def problem_flags(sp_):
        sp_.add_argument("--ode", help="equation, e.g. \"y'''' = F(y''')\"")
        sp_.add_argument("--unknown", action="append", help="unknown function, e.g. F/1")
        sp_.add_argument("--sym", action="append", help="generator, e.g. \"x^2*d/dy\" or \"Z = x^2*d/dy\"")
        sp_.add_argument("--input", help="problem file (unknown/ode/sym lines)")
        sp_.add_argument("--json", action="store_true")

    c = sub.add_parser("classify", help="algebra type and family of a third-order equation")
    problem_flags(c)
    c.set_defaults(func=cmd_classify)

    r = sub.add_parser("reduce", help="one reduction step")
    problem_flags(r)
    r.add_argument("--by", help="name of the generator to reduce by (default: first)")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reduce)

    ch = sub.add_parser("chain", help="full reduction chain with trace output")
    problem_flags(ch)
    ch.add_argument("--order", help="comma-separated generator names, e.g. Z,Y,X")
    ch.add_argument("--degree", type=int, default=2, help="ansatz degree bound")
    ch.add_argument("--no-inverse", action="store_true", help="no negative powers of x in the ansatz")
    ch.add_argument("--no-detect", action="store_true", help="skip the symmetry search after each step")
    ch.add_argument("-o", "--output", help="trace JSON path")
    ch.set_defaults(func=cmd_chain)

    pa = sub.add_parser("paths", help="reduction-path skeletons from a commutator table")
    pa.add_argument("--table", required=True, help="table file, or inline text with ';' for newlines")
    pa.add_argument("--source-order", type=int, default=4)
    pa.add_argument("--json", action="store_true")
    pa.set_defaults(func=cmd_paths)

    d = sub.add_parser("derive-families", help="third-order families from the canonical pairs")
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_derive_families)

    v = sub.add_parser("verify", help="numeric checks on a trace")
    v.add_argument("trace")
    v.add_argument("--instantiate", action="append", help="e.g. \"F(s) = s\"")
    v.add_argument("--interval", type=float, nargs=2, default=(0.5, 2.0))
    v.add_argument("--x0", type=float)
    v.add_argument("--jets", help="initial y, y', ... at x0, comma-separated (default all 1)")
    v.add_argument("--step", type=float, default=1e-3)
    v.add_argument("--figures", help="directory for residual plots and summary.csv")
    v.add_argument("-o", "--output", help="trace copy with numeric_checks added")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (Rejected, NotASymmetry, UnsupportedClass, AlgebraError, ReductionError, numeric.NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (parse.ParseError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
