"""U-sentence calculus: conjunction, existentialized constants, translation, relativization.

Every construction here comes with a brute-force certifier that compares
the two sides over all small structures (and teams), returning the first
mismatch it meets.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .atoms import Registry
from .model import DEFAULT_CAP, Structure, Team, all_tuples, enumerate_relations, random_team, relabel, team_projection
from .syntax import (
    And,
    Atom,
    Const,
    Eq,
    Exists,
    Flag,
    Forall,
    GOr,
    Or,
    Rel,
    TeamlabError,
    USentence,
    Var,
    conj,
    free_variables,
    fresh_names,
    parse_formula,
    substitute,
    to_text,
    validate_u_sentence,
    variable_names,
)
from .tarski import dep_membership, eval_tarski
from .teamsem import TeamEvaluator


class CalculusError(TeamlabError):
    pass


class RelativizationError(CalculusError):
    pass


def _all_vars(s: USentence) -> set:
    return variable_names(s.formula)


# ---------------------------------------------------------------------------
# constructions


def conjoin_u(chi: USentence, other: USentence) -> USentence:
    """A U-sentence equivalent to ``chi and other``.

    The existential variables of ``other`` are renamed apart from ``chi`` and
    its universal variables are identified with those of ``chi``.
    """
    if chi.rel != other.rel or chi.arity != other.arity:
        raise CalculusError(f"signature mismatch: {chi.rel}/{chi.arity} against {other.rel}/{other.arity}")
    taken = _all_vars(chi)
    avoid = taken | _all_vars(other)
    clashing = [z for z in other.xs if z in taken]
    fresh = iter(fresh_names(avoid, len(clashing)))
    rename = {z: next(fresh) for z in clashing}
    mapping = {z: Var(v) for z, v in rename.items()}
    zs = tuple(rename.get(z, z) for z in other.xs)
    eta = tuple(substitute(lit, mapping) for lit in other.eta)
    mapping.update({w: Var(y) for w, y in zip(other.ys, chi.ys)})
    theta = substitute(other.theta, mapping)
    out = USentence(chi.xs + zs, chi.eta + eta, chi.ys, And(chi.theta, theta), chi.rel)
    return validate_u_sentence(out.formula, chi.rel)


def replace_constant(f, name: str, term):
    """Replace every occurrence of the constant ``name`` by ``term`` (assumed fresh)."""
    swap = lambda t: term if isinstance(t, Const) and t.name == name else t
    if isinstance(f, Rel):
        return Rel(f.name, tuple(swap(t) for t in f.args), f.positive)
    if isinstance(f, Eq):
        return Eq(swap(f.left), swap(f.right), f.positive)
    if isinstance(f, Atom):
        return f
    if isinstance(f, (And, Or, GOr)):
        return type(f)(replace_constant(f.left, name, term), replace_constant(f.right, name, term))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, replace_constant(f.body, name, term))
    raise TypeError(f"not a formula: {f!r}")


def existentialize_constant(chi: USentence, a: str) -> USentence:
    """``E v. chi[v/a]`` as a U-sentence, ``v`` fresh and prepended to the existential block."""
    if a not in chi.constants():
        raise CalculusError(f"constant {a!r} does not occur in {chi}")
    (v,) = fresh_names(_all_vars(chi), 1)
    eta = tuple(replace_constant(lit, a, Var(v)) for lit in chi.eta)
    theta = replace_constant(chi.theta, a, Var(v))
    out = USentence((v,) + chi.xs, eta, chi.ys, theta, chi.rel)
    return validate_u_sentence(out.formula, chi.rel)


def top(w: str) -> Eq:
    return Eq(Var(w), Var(w))


def translate_u(chi: USentence, ws: Iterable[str]) -> object:
    """The team formula over ``ws`` whose teams are those with ``X(ws)`` satisfying ``chi``.

    Each positive ``R t`` in eta becomes ``(w1 = w1 or (ne(ws) and t = ws))``;
    identity literals stay as they are, the existential variables are made
    constant and the universal variables of the matrix become ``ws``.
    """
    ws = tuple(ws)
    if len(ws) != chi.arity:
        raise CalculusError(f"need {chi.arity} team variables, got {len(ws)}")
    if len(set(ws)) != len(ws) or not ws:
        raise CalculusError("team variables must be distinct and nonempty")
    clash = set(ws) & _all_vars(chi)
    if clash:
        raise CalculusError(f"variable clash: {sorted(clash)} already occur in {chi}")
    wvars = tuple(Var(w) for w in ws)
    parts = []
    if chi.xs:
        parts.append(Atom("const", (chi.xs,)))
    for lit in chi.eta:
        if isinstance(lit, Rel) and lit.name == chi.rel:
            parts.append(Or(top(ws[0]), And(Atom("ne", (ws,)), conj(*(Eq(t, w) for t, w in zip(lit.args, wvars))))))
        else:
            parts.append(lit)
    parts.append(substitute(chi.theta, dict(zip(chi.ys, wvars))))
    body = conj(*parts)
    for x in reversed(chi.xs):
        body = Exists(x, body)
    return body


def translate_disjunction(chis: Iterable[USentence], ws: Iterable[str]):
    ws = tuple(ws)
    chis = list(chis)
    if not chis:
        raise CalculusError("empty disjunction")
    out = translate_u(chis[0], ws)
    for chi in chis[1:]:
        out = GOr(out, translate_u(chi, ws))
    return out


def drop_ne(f):
    """Mutation used to show the certifier has teeth: every ``ne`` conjunct becomes trivial."""
    if isinstance(f, And):
        if isinstance(f.left, Atom) and f.left.name == "ne":
            return drop_ne(f.right)
        if isinstance(f.right, Atom) and f.right.name == "ne":
            return drop_ne(f.left)
        return And(drop_ne(f.left), drop_ne(f.right))
    if isinstance(f, (Or, GOr)):
        return type(f)(drop_ne(f.left), drop_ne(f.right))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, drop_ne(f.body))
    return f


def relativize_atom(registry: Registry, name: str, pred: str, xs: Iterable[str], split: tuple | None = None):
    """``D xs and P x1 and ... and P xk`` for a domain-independent ``D``."""
    xs = tuple(xs)
    spec = registry.spec(name, split)
    if spec.closure.domind is not Flag.YES:
        raise RelativizationError(
            f"{spec.label()} is not known to be domain independent; relativization via "
            f"'D xs and P x' is only sound for domain-independent dependencies")
    parts = [spec.atom(xs)]
    seen = []
    for x in xs:
        if x not in seen:
            seen.append(x)
            parts.append(Rel(pred, (Var(x),)))
    return conj(*parts)


def relativized_membership(spec, M: Structure, pred: str, X: Team, xs) -> bool:
    """``(P^M, X(xs)) in D``; false when ``X(xs)`` leaves ``P^M``."""
    p = sorted(M.relations[pred].tuples)
    elements = [t[0] for t in p]
    r = team_projection(X, xs)
    if any(a not in elements for t in r.tuples for a in t):
        return False
    return dep_membership(spec, len(elements), relabel(r, elements))


# ---------------------------------------------------------------------------
# certification


@dataclass
class Equivalence:
    """Outcome of a brute-force comparison."""

    name: str
    checked: int = 0
    mismatch: dict | None = None
    notes: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.mismatch is None

    def to_dict(self) -> dict:
        return {"name": self.name, "checked": self.checked, "holds": self.holds,
                "mismatch": self.mismatch, "notes": self.notes}


def check_equivalence(name: str, cases: Iterable, lhs: Callable, rhs: Callable, describe: Callable = repr,
                      first_only: bool = True) -> Equivalence:
    """Compare ``lhs(case)`` with ``rhs(case)`` over every case; record the first mismatch."""
    out = Equivalence(name)
    for case in cases:
        out.checked += 1
        a, b = lhs(case), rhs(case)
        if a != b:
            out.mismatch = {"case": describe(case), "lhs": a, "rhs": b}
            if first_only:
                break
    return out


def structures(nmax: int, arity: int, constants: Iterable[str] = (), rel: str = "R", cap: int = DEFAULT_CAP):
    """Every structure ``(A, R, constants)`` with ``1 <= |A| <= nmax``."""
    constants = sorted(constants)
    for n in range(1, nmax + 1):
        for r in enumerate_relations(n, arity, cap):
            for values in itertools.product(range(n), repeat=len(constants)):
                yield Structure(n, {rel: r}, dict(zip(constants, values)))


def describe_structure(M: Structure) -> dict:
    return {
        "n": M.n,
        "relations": {name: [list(t) for t in r] for name, r in M.relations.items()},
        "constants": dict(M.constants),
    }


def certify_conjunction(chi: USentence, other: USentence, nmax: int = 3) -> Equivalence:
    out = conjoin_u(chi, other)
    consts = chi.constants() | other.constants()
    return check_equivalence(
        f"{chi} & {other}", structures(nmax, chi.arity, consts, chi.rel),
        lambda M: eval_tarski(M, {}, out.formula),
        lambda M: eval_tarski(M, {}, chi.formula) and eval_tarski(M, {}, other.formula),
        describe_structure)


def certify_existentialization(chi: USentence, a: str, nmax: int = 3) -> Equivalence:
    out = existentialize_constant(chi, a)
    rest = chi.constants() - {a}

    def spec_side(M):
        return any(eval_tarski(M.with_constants(**{a: m}), {}, chi.formula) for m in M.domain)

    return check_equivalence(
        f"E {a}. {chi}", structures(nmax, chi.arity, rest, chi.rel),
        lambda M: eval_tarski(M, {}, out.formula), spec_side, describe_structure)


def translation_cases(n: int, ws: tuple, extra: tuple = (), cap: int = DEFAULT_CAP, samples: int = 10_000,
                      seed: int = 0):
    """Teams over ``ws + extra``: all of them when ``n**|vars| <= cap``, else a seeded sample."""
    variables = tuple(ws) + tuple(extra)
    slots = n ** len(variables)
    if slots <= cap:
        rows = all_tuples(n, len(variables))
        for mask in range(1 << slots):
            yield Team(variables, frozenset(rows[i] for i in range(slots) if mask >> i & 1))
    else:
        rng = random.Random(seed)
        for _ in range(samples):
            yield random_team(n, variables, rng, density=rng.random())


def certify_translation(chis, ws, nmax: int = 3, nmin: int = 1, extra: tuple = (),
                        cap: int = DEFAULT_CAP, samples: int = 10_000, seed: int = 0, formula=None,
                        registry: Registry | None = None) -> Equivalence:
    """Teams satisfying the translation are exactly those whose ``X(ws)`` satisfies some ``chi``.

    Constants range over every interpretation.  ``formula`` overrides the
    translated formula, which is how mutation tests inject a broken one.
    """
    chis = list(chis)
    ws = tuple(ws)
    phi = formula if formula is not None else translate_disjunction(chis, ws)
    consts = sorted(set().union(*(c.constants() for c in chis)))
    rel = chis[0].rel
    out = Equivalence(to_text(phi))
    sizes = range(nmin, nmax + 1)
    if any(n ** (len(ws) + len(extra)) > cap for n in sizes):
        out.notes.append(f"domains with more than {cap} team slots sampled ({samples} teams, seed {seed})")
    for n in sizes:
        for values in itertools.product(range(n), repeat=len(consts)):
            M = Structure(n, {}, dict(zip(consts, values)))
            ev = TeamEvaluator(M, registry)
            cache = {}
            for X in translation_cases(n, ws, extra, cap, samples, seed + n):
                out.checked += 1
                r = team_projection(X, ws)
                if r.tuples not in cache:
                    N = Structure(n, {rel: r}, M.constants)
                    cache[r.tuples] = any(eval_tarski(N, {}, c.formula) for c in chis)
                lhs = ev.holds(X, phi)
                if lhs != cache[r.tuples]:
                    out.mismatch = {"case": {"n": n, "constants": dict(M.constants), "team": str(X)},
                                    "lhs": lhs, "rhs": cache[r.tuples]}
                    return out
    return out


def certify_relativization(registry: Registry, name: str, nmax: int = 3, pred: str = "P",
                           split: tuple | None = None, cap: int = DEFAULT_CAP) -> Equivalence:
    """Team truth of the relativized atom equals membership of ``(P^M, X(xs))``, over all ``P`` and teams."""
    spec = registry.spec(name, split)
    xs = tuple(f"x{i}" for i in range(1, spec.arity + 1))
    phi = relativize_atom(registry, name, pred, xs, split)
    out = Equivalence(to_text(phi))
    for n in range(1, nmax + 1):
        for p in enumerate_relations(n, 1, cap):
            M = Structure(n, {pred: p}, pred=pred)
            ev = TeamEvaluator(M, registry)
            for X in translation_cases(n, xs, cap=cap):
                out.checked += 1
                lhs = ev.holds(X, phi)
                rhs = relativized_membership(spec, M, pred, X, xs)
                if lhs != rhs:
                    out.mismatch = {"case": {"n": n, "P": sorted(t[0] for t in p), "team": str(X)},
                                    "lhs": lhs, "rhs": rhs}
                    return out
    return out


def parse_u_sentence(text: str, constants=()) -> USentence:
    """Parse and validate; identifiers left free are read as constant symbols."""
    f = parse_formula(text, constants=constants)
    loose = free_variables(f)
    if loose:
        f = parse_formula(text, constants=tuple(constants) + tuple(sorted(loose)))
    return validate_u_sentence(f)


def load_u_sentences(text: str, constants=()) -> list:
    """One U-sentence per line; ``#`` starts a comment."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_u_sentence(line, constants))
    return out
