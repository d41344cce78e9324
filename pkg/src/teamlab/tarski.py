"""Single-assignment first-order evaluation and dependency membership."""

from __future__ import annotations

from typing import Mapping

from .model import Relation, Structure
from .syntax import (
    And,
    Atom,
    Const,
    DependencySpec,
    Eq,
    Exists,
    Forall,
    GOr,
    Or,
    Rel,
    TeamlabError,
    Var,
)


class EvaluationError(TeamlabError):
    pass


def term_value(M: Structure, s: Mapping[str, int], t) -> int:
    if isinstance(t, Var):
        try:
            return s[t.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {t.name!r}") from None
    if isinstance(t, Const):
        try:
            return M.constants[t.name]
        except KeyError:
            raise EvaluationError(f"constant {t.name!r} is not interpreted") from None
    raise EvaluationError(f"not a term: {t!r}")


def relation_of(M: Structure, name: str, arity: int) -> Relation:
    r = M.relations.get(name)
    if r is None:
        raise EvaluationError(f"relation {name!r} is not interpreted")
    if r.arity != arity:
        raise EvaluationError(f"relation {name!r} has arity {r.arity}, applied to {arity} terms")
    return r


def eval_tarski(M: Structure, s: Mapping[str, int], phi) -> bool:
    """Classical truth of a first-order NNF formula under assignment ``s``."""
    if isinstance(phi, Rel):
        r = relation_of(M, phi.name, len(phi.args))
        holds = tuple(term_value(M, s, t) for t in phi.args) in r.tuples
        return holds == phi.positive
    if isinstance(phi, Eq):
        holds = term_value(M, s, phi.left) == term_value(M, s, phi.right)
        return holds == phi.positive
    if isinstance(phi, And):
        return eval_tarski(M, s, phi.left) and eval_tarski(M, s, phi.right)
    if isinstance(phi, Or):
        return eval_tarski(M, s, phi.left) or eval_tarski(M, s, phi.right)
    if isinstance(phi, (Exists, Forall)):
        inner = dict(s)
        want = isinstance(phi, Exists)
        for m in M.domain:
            inner[phi.var] = m
            if eval_tarski(M, inner, phi.body) == want:
                return want
        return not want
    if isinstance(phi, (Atom, GOr)):
        raise EvaluationError("dependency atoms and global disjunction have no Tarskian reading")
    raise EvaluationError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# built-in dependencies read as properties of a relation


def _split(t, k1):
    return t[:k1], t[k1:]


def _dep(n, tuples, split):
    seen = {}
    for t in tuples:
        a, b = _split(t, split[0])
        if seen.setdefault(a, b) != b:
            return False
    return True


def _inc(n, tuples, split):
    left = {_split(t, split[0])[0] for t in tuples}
    right = {_split(t, split[0])[1] for t in tuples}
    return left <= right


def _exc(n, tuples, split):
    left = {_split(t, split[0])[0] for t in tuples}
    right = {_split(t, split[0])[1] for t in tuples}
    return not (left & right)


def _anon(n, tuples, split):
    count = {}
    for t in tuples:
        a = t[:split[0]]
        count[a] = count.get(a, 0) + 1
    # tuples are distinct, so a second tuple with the same left part differs on the right
    return all(c >= 2 for c in count.values())


def _indep(n, tuples, split):
    left = {_split(t, split[0])[0] for t in tuples}
    right = {_split(t, split[0])[1] for t in tuples}
    return len(tuples) == len(left) * len(right)


def _ne(n, tuples, split):
    return bool(tuples)


def _const(n, tuples, split):
    return len(tuples) <= 1


def _all(n, tuples, split):
    return len(tuples) == n ** sum(split)


BUILTIN_CHECKS = {
    "dep": _dep, "inc": _inc, "exc": _exc, "anon": _anon, "indep": _indep,
    "ne": _ne, "const": _const, "all": _all,
}


def _domain_size(M) -> int:
    return M.n if isinstance(M, Structure) else int(M)


def dep_membership(D: DependencySpec, M, R: Relation) -> bool:
    """Whether ``(A, R)`` belongs to ``D``, with ``A`` the domain of ``M``.

    ``M`` may be a structure or a domain size.  Built-ins are decided
    directly from the relation; user dependencies by evaluating their
    defining sentence with ``R`` interpreted as the given relation.
    """
    if R.arity != D.arity:
        raise EvaluationError(f"{D.label()} has arity {D.arity}, relation has arity {R.arity}")
    n = _domain_size(M)
    if D.builtin:
        return BUILTIN_CHECKS[D.tag](n, R.tuples, D.split)
    return membership_by_sentence(D, n, R)


def membership_by_sentence(D: DependencySpec, n: int, R: Relation) -> bool:
    """Membership decided by the defining sentence ``D(R)``, for any spec."""
    if D.sentence is None:
        raise EvaluationError(f"{D.label()} has no defining sentence")
    return eval_tarski(Structure(n, {D.symbol: R}), {}, D.sentence)
