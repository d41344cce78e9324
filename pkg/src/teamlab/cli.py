"""Command-line front end: ``teamlab <command> ...``.

Exit codes: 0 when the result holds, 1 when it is false or a
counterexample or mismatch was found, 2 on usage, parse or refusal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import lab, ucalc
from .atoms import Registry, builtin_spec, parse_dependency_ref
from .model import EMPTY_ASSIGNMENT_TEAM, Relation, Structure, Team, fld, relabel
from .syntax import CLOSURE_PROPERTIES, ParseError, TeamlabError, free_variables, to_text
from .teamsem import TeamEvaluator

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR = 0, 1, 2


class InputError(TeamlabError):
    pass


# ---------------------------------------------------------------------------
# file formats


def _element(token: str, index: dict, lineno: int) -> int:
    if token in index:
        return index[token]
    raise InputError(f"line {lineno}: unknown element {token!r}")


def parse_structure(text: str) -> Structure:
    """Read the line-oriented structure format.

    ``domain 3`` or ``domain a b c``; ``rel R/2 = (0,1) (1,2)``;
    ``const a = 0``; ``pred P = 0 1``; ``#`` comments.
    """
    n, labels, index = None, None, {}
    relations, constants, pred = {}, {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "domain":
            if n is not None:
                raise InputError(f"line {lineno}: domain declared twice")
            parts = rest.split()
            if len(parts) == 1 and parts[0].isdigit():
                n = int(parts[0])
            else:
                labels = tuple(parts)
                if len(set(labels)) != len(labels):
                    raise InputError(f"line {lineno}: repeated element label")
                n = len(labels)
            if n < 1:
                raise InputError(f"line {lineno}: the domain must be nonempty")
            index = {str(i): i for i in range(n)}
            if labels:
                index = {lab_: i for i, lab_ in enumerate(labels)}
            continue
        if n is None:
            raise InputError(f"line {lineno}: 'domain' must come first")
        name_part, eq, values = rest.partition("=")
        if not eq:
            raise InputError(f"line {lineno}: expected '='")
        name_part, values = name_part.strip(), values.strip()
        if head == "rel":
            name, slash, arity = name_part.partition("/")
            if not slash or not arity.strip().isdigit() or not name.strip().isidentifier():
                raise InputError(f"line {lineno}: expected 'rel NAME/ARITY = tuples'")
            name, k = name.strip(), int(arity)
            tuples = set()
            body = values.replace(" ", "")
            if k == 0:
                if body not in ("", "()"):
                    raise InputError(f"line {lineno}: a 0-ary relation is '()' or empty")
                tuples = {()} if body == "()" else set()
            elif body:
                if not (body.startswith("(") and body.endswith(")")):
                    raise InputError(f"line {lineno}: tuples are written (a,b)")
                for chunk in body[1:-1].split(")("):
                    items = chunk.split(",")
                    if len(items) != k:
                        raise InputError(f"line {lineno}: tuple ({chunk}) does not have arity {k}")
                    tuples.add(tuple(_element(t, index, lineno) for t in items))
            relations[name] = Relation(k, frozenset(tuples))
        elif head == "const":
            if not name_part.isidentifier():
                raise InputError(f"line {lineno}: bad constant name {name_part!r}")
            constants[name_part] = _element(values, index, lineno)
        elif head == "pred":
            if pred is not None:
                raise InputError(f"line {lineno}: only one distinguished predicate")
            pred = name_part
            relations[pred] = Relation(1, frozenset((_element(t, index, lineno),) for t in values.split()))
        else:
            raise InputError(f"line {lineno}: unknown directive {head!r}")
    if n is None:
        raise InputError("missing 'domain' line")
    return Structure(n, relations, constants, pred, labels)


def parse_team(text: str | None, M: Structure, default_vars=()) -> Team:
    """``x=0,y=1; x=1,y=1``; ``eps`` or None for the team of the empty assignment; ``""`` for the empty team."""
    if text is None or text.strip() == "eps":
        return EMPTY_ASSIGNMENT_TEAM
    index = {M.label(i): i for i in M.domain}
    index.update({str(i): i for i in M.domain})
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        row = {}
        for pair in chunk.split(","):
            var, eq, val = pair.partition("=")
            var, val = var.strip(), val.strip()
            if not eq or not var.isidentifier():
                raise InputError(f"bad assignment {pair!r}: expected var=value")
            if val not in index:
                raise InputError(f"{val!r} is not an element of the domain")
            if var in row:
                raise InputError(f"variable {var} assigned twice in {chunk!r}")
            row[var] = index[val]
        rows.append(row)
    if not rows:
        return Team(tuple(sorted(default_vars)), frozenset())
    variables = tuple(rows[0])
    for r in rows:
        if set(r) != set(variables):
            raise InputError("all assignments of a team need the same variables")
    return Team.from_assignments(rows, variables)


def team_literal(variables, rows) -> str:
    rows = sorted(rows)
    if not variables:
        return "eps" if rows else ""
    return "; ".join(",".join(f"{v}={a}" for v, a in zip(variables, r)) for r in rows)


def load_registry(paths) -> Registry:
    reg = Registry()
    for p in paths or ():
        reg.load_file(p)
    return reg


def schema() -> dict:
    return json.loads(resources.files("teamlab").joinpath("schemas/report.json").read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# counterexample checks runnable through `teamlab eval`


def _check(spec, n, rows, expected) -> dict:
    xs = tuple(f"x{i}" for i in range(1, spec.arity + 1))
    return {
        "structure": f"domain {n}",
        "team": team_literal(xs, [tuple(r) for r in rows]),
        "formula": to_text(spec.atom(xs)),
        "expected": bool(expected),
    }


def counterexample_checks(spec, prop: str, cex: dict) -> list:
    """Eval invocations that reproduce the counterexample's membership facts."""
    n = cex["n"]
    if prop == "empty":
        return [_check(spec, n, [], False)]
    if prop in ("down", "up"):
        return [_check(spec, n, cex["R"], True), _check(spec, n, cex["S"], False)]
    if prop == "union":
        if "family" in cex:
            return [_check(spec, n, [], False)]
        return [_check(spec, n, cex["R1"], True), _check(spec, n, cex["R2"], True),
                _check(spec, n, cex["union"], False)]
    if prop == "domind":
        rel = Relation(spec.arity, frozenset(map(tuple, cex["R"])))
        small = relabel(rel, fld(rel))
        return [_check(spec, n, cex["R"], cex["member_over_domain"]),
                _check(spec, len(cex["fld"]), [list(t) for t in small], cex["member_over_fld"])]
    if prop == "nonjumping":
        return [_check(spec, n, cex["R"], True)]
    raise ValueError(prop)


def _verdict_json(spec, v: lab.Verdict) -> dict:
    out = v.to_dict()
    out["checks"] = counterexample_checks(spec, v.prop, v.counterexample) if v.counterexample else []
    return out


# ---------------------------------------------------------------------------
# commands


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _spec(reg: Registry, ref: str, split_text: str | None = None):
    name, split = parse_dependency_ref(ref)
    if split_text:
        split = tuple(int(p) for p in split_text.replace(",", ";").split(";") if p.strip())
    return reg.spec(name, split)


def cmd_eval(args) -> int:
    M = parse_structure(Path(args.structure).read_text(encoding="utf-8"))
    reg = load_registry(args.deps)
    phi = reg.parse(args.formula, constants=tuple(M.constants))
    X = parse_team(args.team, M, free_variables(phi))
    ev = TeamEvaluator(M, reg, prune=not args.naive)
    result = ev.holds(X, phi)
    if args.explain or args.json:
        report = {"command": "eval", "formula": to_text(phi), "team": str(X), "result": result}
        if args.explain:
            report["explanation"] = ev.explain(X, phi)
        _emit(report)
    else:
        print("true" if result else "false")
    return EXIT_TRUE if result else EXIT_FALSE


def cmd_probe(args) -> int:
    reg = load_registry(args.deps)
    spec = _spec(reg, args.dependency, args.split)
    props = [p.strip() for p in args.props.split(",")] if args.props else list(CLOSURE_PROPERTIES)
    for p in props:
        if p not in lab.PROBES:
            raise InputError(f"unknown property {p!r}; choose from {', '.join(CLOSURE_PROPERTIES)}")
    verdicts = [lab.probe(spec, p, args.nmax, seed=args.seed, samples=args.samples, jobs=args.jobs) for p in props]
    _emit({"command": "probe", "dependency": spec.label(), "nmax": args.nmax, "seed": args.seed,
           "verdicts": [_verdict_json(spec, v) for v in verdicts]})
    return EXIT_TRUE if all(v.holds for v in verdicts) else EXIT_FALSE


def cmd_table1(args) -> int:
    report = lab.reproduce_table1(args.nmax, seed=args.seed, jobs=args.jobs)
    for tag, row in report["rows"].items():
        spec = builtin_spec(tag)
        for p, v in row["verdicts"].items():
            v["checks"] = counterexample_checks(spec, p, v["counterexample"]) if v["counterexample"] else []
    report.update({"command": "table1", "seed": args.seed})
    _emit(report)
    return EXIT_TRUE if report["all_match"] else EXIT_FALSE


def cmd_translate(args) -> int:
    chis = ucalc.load_u_sentences(Path(args.ufile).read_text(encoding="utf-8"))
    if not chis:
        raise InputError("no U-sentences in the file")
    arity = chis[0].arity
    if any(c.arity != arity for c in chis):
        raise InputError("all U-sentences of a disjunction need the same arity")
    ws = tuple(v.strip() for v in args.vars.split(",")) if args.vars else \
        (("w",) if arity == 1 else tuple(f"w{i}" for i in range(1, arity + 1)))
    phi = ucalc.translate_disjunction(chis, ws)
    report = {"command": "translate", "vars": list(ws), "sources": [str(c) for c in chis],
              "formula": to_text(phi), "seed": args.seed}
    ok = True
    if not args.no_certify:
        cert = ucalc.certify_translation(chis, ws, args.nmax, seed=args.seed)
        report["certification"] = cert.to_dict()
        ok = cert.holds
    _emit(report)
    return EXIT_TRUE if ok else EXIT_FALSE


def cmd_relativize(args) -> int:
    reg = load_registry(args.deps)
    name, split = parse_dependency_ref(args.dependency)
    spec = reg.spec(name, split)
    xs = tuple(v.strip() for v in args.vars.split(",")) if args.vars else \
        tuple(f"x{i}" for i in range(1, spec.arity + 1))
    phi = ucalc.relativize_atom(reg, name, args.pred, xs, split)
    report = {"command": "relativize", "dependency": spec.label(), "pred": args.pred, "formula": to_text(phi)}
    ok = True
    if not args.no_certify:
        cert = ucalc.certify_relativization(reg, name, args.nmax, args.pred, split)
        report["certification"] = cert.to_dict()
        ok = cert.holds
    _emit(report)
    return EXIT_TRUE if ok else EXIT_FALSE


def cmd_stepsearch(args) -> int:
    reg = load_registry(args.deps)
    spec = _spec(reg, args.dependency, args.split)
    witnesses = lab.step_search(spec, args.nmax, args.rank, seed=args.seed, samples=args.samples, jobs=args.jobs)
    out = []
    for w in witnesses:
        d = w.to_dict()
        d["checks"] = lab.verify_step_witness(spec, w)
        out.append(d)
    print(f"# seed {args.seed}; {lab.STEP_CAVEAT}", file=sys.stderr)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_TRUE


def cmd_nonjumping(args) -> int:
    reg = load_registry(args.deps)
    spec = _spec(reg, args.dependency, args.split)
    v = lab.nonjumping_probe(spec, args.nmax)
    _emit({"command": "nonjumping", "dependency": spec.label(), "nmax": args.nmax,
           "verdict": _verdict_json(spec, v)})
    return EXIT_TRUE if v.holds else EXIT_FALSE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teamlab", description="Team semantics laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=False, jobs=False, nmax=3):
        p.add_argument("--deps", action="append", help="dependency definition file (repeatable)")
        p.add_argument("--nmax", type=int, default=nmax)
        if seed:
            p.add_argument("--seed", type=int, default=lab.DEFAULT_SEED)
            p.add_argument("--samples", type=int, default=lab.DEFAULT_SAMPLES)
        if jobs:
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("eval", help="decide M |=_X phi")
    p.add_argument("structure")
    p.add_argument("formula")
    p.add_argument("--team", help="'x=0,y=1; x=1,y=1', 'eps' (default) or '' for the empty team")
    p.add_argument("--explain", action="store_true", help="print the witnessing covers and choices")
    p.add_argument("--json", action="store_true")
    p.add_argument("--naive", action="store_true", help="disable pruning")
    p.add_argument("--deps", action="append")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="closure-property probes for one dependency")
    p.add_argument("dependency", help="name, optionally with a split such as dep(1;2)")
    p.add_argument("--props", help=f"comma list from {','.join(CLOSURE_PROPERTIES)}")
    p.add_argument("--split")
    common(p, seed=True, jobs=True)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("table1", help="reproduce the closure table for the built-ins")
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--seed", type=int, default=lab.DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("translate", help="translate U-sentences into constancy/NE logic")
    p.add_argument("ufile")
    p.add_argument("--vars", help="comma list of team variables")
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-certify", action="store_true")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("relativize", help="relativize a domain-independent dependency to a predicate")
    p.add_argument("dependency")
    p.add_argument("--pred", required=True)
    p.add_argument("--vars")
    p.add_argument("--no-certify", action="store_true")
    common(p)
    p.set_defaults(func=cmd_relativize)

    p = sub.add_parser("stepsearch", help="search for forbidden steps up to rank-k equivalence")
    p.add_argument("dependency")
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--split")
    common(p, seed=True, jobs=True)
    p.set_defaults(func=cmd_stepsearch)

    p = sub.add_parser("nonjumping", help="check that every member reaches a maximal member")
    p.add_argument("dependency")
    p.add_argument("--split")
    common(p)
    p.set_defaults(func=cmd_nonjumping)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_TRUE
    try:
        return args.func(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
    except (TeamlabError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
