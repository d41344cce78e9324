"""Abstract syntax, parser and printer for first-order formulas with dependency atoms.

Formulas are immutable trees in negation normal form.  Negation only ever
appears as the polarity of a literal; the parser rejects ``!`` in front of
anything that is not a relation application.

Grammar (whitespace insensitive)::

    formula  := gor
    gor      := or ('gor' or)*
    or       := and ('or' and)*
    and      := unary ('and' unary)*
    unary    := ('E' | 'A') ident (',' ident)* '.' formula
              | '(' formula ')'
              | '(' terms ')' '=' '(' terms ')'        # tuple equality, expanded
              | '!'? ident '(' terms? ')'               # relation literal
              | term ('=' | '!=') term                  # equality literal
              | builtin '(' vars (';' vars)* ')'        # dep, inc, exc, anon, indep, ne, const, all
              | 'D' '[' ident ']' '(' vars? ')'         # user dependency
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, Iterable, Iterator, Mapping, Union


class TeamlabError(Exception):
    """Base class for all errors raised by the package."""


class ParseError(TeamlabError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


class ArityError(TeamlabError):
    pass


class USentenceError(TeamlabError):
    pass


# ---------------------------------------------------------------------------
# terms and formulas


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self):
        return self.name


Term = Union[Var, Const]


@dataclass(frozen=True)
class Rel:
    """Relation literal ``R(t1, ..., tk)`` or its negation."""

    name: str
    args: tuple
    positive: bool = True


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term
    positive: bool = True


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    """Lax split disjunction."""

    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class GOr:
    """Global (Boolean) disjunction."""

    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Atom:
    """Dependency atom; ``groups`` holds the ``;``-separated variable tuples."""

    name: str
    groups: tuple

    @property
    def args(self) -> tuple:
        return tuple(itertools.chain.from_iterable(self.groups))


Literal = Union[Rel, Eq]
Formula = Union[Rel, Eq, And, Or, GOr, Exists, Forall, Atom]

BINARY = (And, Or, GOr)
QUANTIFIERS = (Exists, Forall)

BUILTIN_TAGS = ("dep", "inc", "exc", "anon", "indep", "ne", "const", "all")
# number of ';'-separated groups each built-in takes
BUILTIN_GROUPS = {
    "dep": 2, "inc": 2, "exc": 2, "anon": 2, "indep": 2,
    "ne": 1, "const": 1, "all": 1,
}
KEYWORDS = frozenset({"and", "or", "gor", "E", "A", "D", *BUILTIN_TAGS})
RESERVED_PREFIX = "_v"


def is_literal(f) -> bool:
    return isinstance(f, (Rel, Eq))


def negate_literal(lit: Literal) -> Literal:
    if isinstance(lit, Rel):
        return Rel(lit.name, lit.args, not lit.positive)
    return Eq(lit.left, lit.right, not lit.positive)


def conj(*fs: Formula) -> Formula:
    """Left-nested conjunction of one or more formulas."""
    if not fs:
        raise ValueError("empty conjunction")
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def exists_block(variables: Iterable[str], body: Formula) -> Formula:
    for v in reversed(tuple(variables)):
        body = Exists(v, body)
    return body


def forall_block(variables: Iterable[str], body: Formula) -> Formula:
    for v in reversed(tuple(variables)):
        body = Forall(v, body)
    return body


def tuple_eq(left: Iterable[Term], right: Iterable[Term]) -> Formula:
    """Expand ``(a1..ak) = (b1..bk)`` into a conjunction of equalities."""
    left, right = tuple(left), tuple(right)
    if len(left) != len(right) or not left:
        raise ArityError("tuple equality needs two nonempty tuples of the same length")
    return conj(*(Eq(a, b) for a, b in zip(left, right)))


def conjuncts(f: Formula) -> list:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


# ---------------------------------------------------------------------------
# traversal helpers


def subformulas(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        if isinstance(g, BINARY):
            stack.append(g.right)
            stack.append(g.left)
        elif isinstance(g, QUANTIFIERS):
            stack.append(g.body)


def _term_vars(terms) -> set:
    return {t.name for t in terms if isinstance(t, Var)}


def free_variables(f: Formula) -> frozenset:
    if isinstance(f, Rel):
        return frozenset(_term_vars(f.args))
    if isinstance(f, Eq):
        return frozenset(_term_vars((f.left, f.right)))
    if isinstance(f, Atom):
        return frozenset(f.args)
    if isinstance(f, BINARY):
        return free_variables(f.left) | free_variables(f.right)
    if isinstance(f, QUANTIFIERS):
        return free_variables(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def variable_names(f: Formula) -> set:
    """Every variable name occurring in ``f``, free or bound."""
    names = set()
    for g in subformulas(f):
        if isinstance(g, Rel):
            names |= _term_vars(g.args)
        elif isinstance(g, Eq):
            names |= _term_vars((g.left, g.right))
        elif isinstance(g, Atom):
            names.update(g.args)
        elif isinstance(g, QUANTIFIERS):
            names.add(g.var)
    return names


def constant_names(f: Formula) -> set:
    out = set()
    for g in subformulas(f):
        terms = g.args if isinstance(g, Rel) else (g.left, g.right) if isinstance(g, Eq) else ()
        out.update(t.name for t in terms if isinstance(t, Const))
    return out


def relation_names(f: Formula) -> set:
    return {g.name for g in subformulas(f) if isinstance(g, Rel)}


def atoms_of(f: Formula) -> list:
    return [g for g in subformulas(f) if isinstance(g, Atom)]


def is_first_order(f: Formula) -> bool:
    return not any(isinstance(g, (Atom, GOr)) for g in subformulas(f))


def quantifier_depth(f: Formula) -> int:
    if isinstance(f, BINARY):
        return max(quantifier_depth(f.left), quantifier_depth(f.right))
    if isinstance(f, QUANTIFIERS):
        return 1 + quantifier_depth(f.body)
    return 0


def depth(f: Formula) -> int:
    if isinstance(f, BINARY):
        return 1 + max(depth(f.left), depth(f.right))
    if isinstance(f, QUANTIFIERS):
        return 1 + depth(f.body)
    return 0


def fresh_names(avoid: Collection[str], count: int, start: int = 0) -> list:
    """Deterministic fresh variables ``_v0, _v1, ...`` not in ``avoid``."""
    out = []
    i = start
    while len(out) < count:
        name = f"{RESERVED_PREFIX}{i}"
        if name not in avoid:
            out.append(name)
        i += 1
    return out


def substitute(f: Formula, mapping: Mapping[str, Term]) -> Formula:
    """Capture-avoiding simultaneous substitution of terms for free variables.

    Atoms only accept variables, so a variable occurring in an atom may only
    be mapped to another variable.
    """
    mapping = {k: v for k, v in mapping.items() if v != Var(k)}
    if not mapping:
        return f
    avoid = variable_names(f) | set(mapping)
    avoid |= {t.name for t in mapping.values() if isinstance(t, Var)}
    return _subst(f, mapping, avoid)


def _subst_term(t: Term, mapping) -> Term:
    if isinstance(t, Var) and t.name in mapping:
        return mapping[t.name]
    return t


def _subst(f, mapping, avoid):
    if isinstance(f, Rel):
        return Rel(f.name, tuple(_subst_term(t, mapping) for t in f.args), f.positive)
    if isinstance(f, Eq):
        return Eq(_subst_term(f.left, mapping), _subst_term(f.right, mapping), f.positive)
    if isinstance(f, Atom):
        groups = []
        for g in f.groups:
            new = []
            for v in g:
                t = mapping.get(v, Var(v))
                if not isinstance(t, Var):
                    raise TypeError(f"cannot substitute constant {t} into atom {f.name}")
                new.append(t.name)
            groups.append(tuple(new))
        return Atom(f.name, tuple(groups))
    if isinstance(f, BINARY):
        return type(f)(_subst(f.left, mapping, avoid), _subst(f.right, mapping, avoid))
    if isinstance(f, QUANTIFIERS):
        free = free_variables(f.body)
        inner = {k: v for k, v in mapping.items() if k != f.var and k in free}
        if not inner:
            return f
        var, body = f.var, f.body
        if any(isinstance(t, Var) and t.name == var for t in inner.values()):
            (var,) = fresh_names(avoid, 1)
            avoid.add(var)
            body = _subst(body, {f.var: Var(var)}, avoid)
        return type(f)(var, _subst(body, inner, avoid))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# printing

_PREC = {GOr: 1, Or: 2, And: 3}
_OPNAME = {GOr: "gor", Or: "or", And: "and"}


def _term_text(t: Term) -> str:
    return t.name


def to_text(f: Formula) -> str:
    """Render ``f`` so that :func:`parse_formula` reads back the same tree."""
    if isinstance(f, Rel):
        body = f"{f.name}({', '.join(map(_term_text, f.args))})"
        return body if f.positive else "!" + body
    if isinstance(f, Eq):
        op = "=" if f.positive else "!="
        return f"{_term_text(f.left)} {op} {_term_text(f.right)}"
    if isinstance(f, Atom):
        inner = " ; ".join(", ".join(g) for g in f.groups)
        if f.name in BUILTIN_TAGS:
            return f"{f.name}({inner})"
        return f"D[{f.name}]({inner})"
    if isinstance(f, QUANTIFIERS):
        q = "E" if isinstance(f, Exists) else "A"
        body = to_text(f.body)
        if isinstance(f.body, BINARY):
            body = f"({body})"
        return f"{q} {f.var}. {body}"
    if isinstance(f, BINARY):
        p = _PREC[type(f)]
        left, right = to_text(f.left), to_text(f.right)
        if isinstance(f.left, QUANTIFIERS) or (isinstance(f.left, BINARY) and _PREC[type(f.left)] < p):
            left = f"({left})"
        if isinstance(f.right, QUANTIFIERS) or (isinstance(f.right, BINARY) and _PREC[type(f.right)] <= p):
            right = f"({right})"
        return f"{left} {_OPNAME[type(f)]} {right}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<neq>!=)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<sym>[()\[\],;.=!])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rindex("\n") + 1
        else:
            value = m.group()
            toks.append(_Tok("sym" if kind == "neq" else kind, value, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text, arities, constants, allow_reserved):
        self.toks = _tokenize(text)
        self.i = 0
        self.arities = dict(arities or {})
        self.constants = frozenset(constants or ())
        self.allow_reserved = allow_reserved
        self.bound: list = []

    # token helpers
    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.col)

    def expect(self, text) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            shown = tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.next()

    def ident(self, what="identifier") -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        if tok.text.startswith("_") and not self.allow_reserved:
            raise self.error(f"identifiers may not start with '_': {tok.text!r}")
        self.next()
        return tok.text

    def at(self, text) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind != "eof"

    # grammar
    def parse(self) -> Formula:
        f = self.formula()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")
        return f

    def formula(self):
        return self.gor()

    def _binary(self, keyword, cls, sub):
        left = sub()
        while self.peek().kind == "ident" and self.peek().text == keyword:
            self.next()
            left = cls(left, sub())
        return left

    def gor(self):
        return self._binary("gor", GOr, self.or_)

    def or_(self):
        return self._binary("or", Or, self.and_)

    def and_(self):
        return self._binary("and", And, self.unary)

    def unary(self):
        tok = self.peek()
        if tok.kind == "ident" and tok.text in ("E", "A") and self.peek(1).kind == "ident":
            return self.quantifier()
        if tok.text == "!":
            self.next()
            nxt = self.peek()
            if nxt.kind == "ident" and nxt.text not in KEYWORDS and self.peek(1).text == "(":
                lit = self.relation()
                return negate_literal(lit)
            raise self.error("negation not in NNF: '!' may only precede a relation literal", tok)
        if tok.text == "(":
            return self.paren()
        if tok.kind == "ident" and tok.text in BUILTIN_TAGS:
            return self.builtin_atom()
        if tok.kind == "ident" and tok.text == "D" and self.peek(1).text == "[":
            return self.user_atom()
        if tok.kind == "ident" and tok.text not in KEYWORDS and self.peek(1).text == "(":
            return self.relation()
        if tok.kind in ("ident", "num"):
            return self.equality()
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    def quantifier(self):
        q = self.next().text
        names = [self.ident("variable")]
        while self.at(","):
            self.next()
            names.append(self.ident("variable"))
        self.expect(".")
        self.bound.extend(names)
        body = self.formula()
        del self.bound[-len(names):]
        cls = Exists if q == "E" else Forall
        for v in reversed(names):
            body = cls(v, body)
        return body

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind == "num":
            raise self.error("numerals are not terms; declare a constant instead")
        name = self.ident("term")
        if name in self.constants and name not in self.bound:
            return Const(name)
        return Var(name)

    def terms_until(self, closer) -> tuple:
        out = []
        if self.at(closer):
            return ()
        out.append(self.term())
        while self.at(","):
            self.next()
            out.append(self.term())
        return tuple(out)

    def relation(self):
        name = self.ident("relation symbol")
        self.expect("(")
        args = self.terms_until(")")
        self.expect(")")
        return Rel(name, args)

    def equality(self):
        left = self.term()
        tok = self.peek()
        if tok.text == "=":
            self.next()
            return Eq(left, self.term())
        if tok.text == "!=":
            self.next()
            return Eq(left, self.term(), False)
        raise self.error(f"expected '=' or '!=' after term {left.name!r}")

    def paren(self):
        # '(' terms ')' '=' '(' terms ')' is tuple equality; otherwise grouping.
        start = self.i
        if self._looks_like_tuple():
            self.expect("(")
            left = self.terms_until(")")
            self.expect(")")
            op = self.next()
            if op.text == "!=":
                raise self.error("tuple disequality is not supported; write the disjunction out", op)
            self.expect("(")
            right = self.terms_until(")")
            close = self.expect(")")
            if len(left) != len(right) or not left:
                raise ParseError("tuple equality needs two nonempty tuples of the same length", close.line, close.col)
            return tuple_eq(left, right)
        self.i = start
        self.expect("(")
        f = self.formula()
        self.expect(")")
        return f

    def _looks_like_tuple(self) -> bool:
        if self.peek(1).kind != "ident":
            return False
        k = 2
        while self.peek(k).text == "," and self.peek(k + 1).kind == "ident":
            k += 2
        return (
            self.peek(k).text == ")"
            and self.peek(k + 1).kind == "sym"
            and self.peek(k + 1).text in ("=", "!=")
            and self.peek(k + 2).text == "("
        )

    def var_group(self, closers) -> tuple:
        out = []
        if self.peek().text in closers:
            return ()
        out.append(self.ident("variable"))
        while self.at(","):
            self.next()
            out.append(self.ident("variable"))
        return tuple(out)

    def builtin_atom(self):
        tok = self.next()
        name = tok.text
        self.expect("(")
        groups = [self.var_group((";", ")"))]
        while self.at(";"):
            self.next()
            groups.append(self.var_group((";", ")")))
        self.expect(")")
        for g in groups:
            for v in g:
                if v in self.constants and v not in self.bound:
                    raise self.error(f"atom {name} takes variables, not the constant {v!r}", tok)
        atom = Atom(name, tuple(groups))
        check_atom_shape(atom, self.arities, tok)
        return atom

    def user_atom(self):
        tok = self.next()
        self.expect("[")
        name = self.ident("dependency name")
        self.expect("]")
        self.expect("(")
        group = self.var_group((")",))
        self.expect(")")
        atom = Atom(name, (group,))
        check_atom_shape(atom, self.arities, tok)
        return atom


def check_atom_shape(atom: Atom, arities: Mapping[str, int], tok=None) -> None:
    """Raise :class:`ArityError` if ``atom`` does not fit its dependency."""
    where = f" at {tok.line}:{tok.col}" if tok is not None else ""
    name = atom.name
    if name in BUILTIN_TAGS:
        want = BUILTIN_GROUPS[name]
        if len(atom.groups) != want:
            raise ArityError(f"atom {to_text(atom)}{where}: {name} takes {want} argument group(s)")
        if name in ("inc", "exc") and len(atom.groups[0]) != len(atom.groups[1]):
            raise ArityError(f"atom {to_text(atom)}{where}: both sides of {name} must have the same length")
        return
    if name not in arities:
        raise ArityError(f"atom {to_text(atom)}{where}: unknown dependency {name!r}")
    if len(atom.groups) != 1 or len(atom.args) != arities[name]:
        raise ArityError(
            f"atom {to_text(atom)}{where}: dependency {name!r} has arity {arities[name]}, got {len(atom.args)}"
        )


def parse_formula(
    text: str,
    arities: Mapping[str, int] | None = None,
    constants: Collection[str] = (),
    allow_reserved: bool = False,
) -> Formula:
    """Parse ``text`` into a formula tree.

    ``arities`` maps user-registered dependency names to their arity.
    Identifiers listed in ``constants`` are read as constant symbols unless
    a quantifier rebinds them.
    """
    return _Parser(text, arities, constants, allow_reserved).parse()


# ---------------------------------------------------------------------------
# dependency specifications


class Flag(Enum):
    YES = "+"
    NO = "-"
    UNKNOWN = "?"

    def __str__(self):
        return self.value


CLOSURE_PROPERTIES = ("empty", "down", "union", "up", "domind")


@dataclass(frozen=True)
class Closure:
    empty: Flag = Flag.UNKNOWN
    down: Flag = Flag.UNKNOWN
    union: Flag = Flag.UNKNOWN
    up: Flag = Flag.UNKNOWN
    domind: Flag = Flag.UNKNOWN

    @classmethod
    def from_row(cls, row: str) -> "Closure":
        """Build from a compact row such as ``"++--+"``."""
        return cls(*(Flag(c) for c in row))

    def row(self) -> str:
        return "".join(getattr(self, p).value for p in CLOSURE_PROPERTIES)

    def __getitem__(self, prop: str) -> Flag:
        return getattr(self, prop)


@dataclass(frozen=True)
class DependencySpec:
    """A ``k``-ary dependency: built-in tag or a first-order sentence over ``{R}``.

    ``split`` records the argument-group lengths (``(1, 1)`` for ``dep(x ; y)``);
    user-defined dependencies have a single group.
    """

    name: str
    arity: int
    tag: str
    split: tuple
    sentence: Formula | None = field(default=None, compare=False)
    closure: Closure = Closure()
    symbol: str = "R"

    @property
    def builtin(self) -> bool:
        return self.tag in BUILTIN_TAGS

    def atom(self, variables: Iterable[str]) -> Atom:
        """The atom of this dependency applied to ``variables``."""
        variables = tuple(variables)
        if len(variables) != self.arity:
            raise ArityError(f"{self.name} has arity {self.arity}, got {len(variables)} variables")
        groups, i = [], 0
        for size in self.split:
            groups.append(variables[i:i + size])
            i += size
        return Atom(self.name, tuple(groups))

    def label(self) -> str:
        if self.builtin and len(self.split) == 2:
            return f"{self.name}({self.split[0]};{self.split[1]})"
        return f"{self.name}({self.arity})"


# ---------------------------------------------------------------------------
# U-sentences


@dataclass(frozen=True)
class USentence:
    """``E xs. (eta and A ys. (!R(ys) or theta))`` with the side conditions checked."""

    xs: tuple
    eta: tuple
    ys: tuple
    theta: Formula
    rel: str = "R"

    @property
    def arity(self) -> int:
        return len(self.ys)

    @property
    def formula(self) -> Formula:
        guard = Rel(self.rel, tuple(Var(y) for y in self.ys), False)
        block = forall_block(self.ys, Or(guard, self.theta))
        body = conj(*self.eta, block) if self.eta else block
        return exists_block(self.xs, body)

    def constants(self) -> set:
        return constant_names(self.formula)

    def __str__(self):
        return to_text(self.formula)


def _u_error(msg):
    return USentenceError(msg)


def validate_u_sentence(
    s: Formula,
    rel: str = "R",
    arity: int | None = None,
) -> USentence:
    """Decompose ``s`` as a U-sentence over ``{rel}`` plus constants.

    Raises :class:`USentenceError` on a shape mismatch, a negative occurrence
    of ``rel`` among the existential conjuncts, or any occurrence of ``rel``
    in the matrix.
    """
    if free_variables(s):
        raise _u_error(f"not a sentence: free variables {sorted(free_variables(s))}")
    for g in subformulas(s):
        if isinstance(g, (Atom, GOr)):
            raise _u_error("U-sentences are first-order: no dependency atoms or global disjunction")
        if isinstance(g, Rel) and g.name != rel:
            raise _u_error(f"relation {g.name!r} is outside the signature {{{rel}}}")

    xs = []
    body = s
    while isinstance(body, Exists):
        xs.append(body.var)
        body = body.body
    if len(set(xs)) != len(xs):
        raise _u_error("existential variables must be distinct")

    parts = conjuncts(body)
    blocks = [i for i, p in enumerate(parts) if _is_guarded_block(p, rel)]
    if not blocks:
        raise _u_error(f"shape mismatch: no universal block A ys. (!{rel}(ys) or theta)")
    block = parts[blocks[0]]
    others = parts[:blocks[0]] + parts[blocks[0] + 1:]

    eta = []
    for lit in others:
        if not is_literal(lit):
            raise _u_error(f"shape mismatch: {to_text(lit)} is neither a literal nor the universal block")
        if isinstance(lit, Rel) and not lit.positive:
            raise _u_error(f"{rel} occurs negatively in eta: {to_text(lit)}")
        eta.append(lit)

    ys, guard, theta = _split_block(block, rel)
    if arity is not None and len(ys) != arity:
        raise _u_error(f"{rel} has arity {arity}, universal block binds {len(ys)} variables")
    if set(ys) & set(xs):
        raise _u_error("existential and universal variables must be disjoint")
    if rel in relation_names(theta):
        raise _u_error(f"{rel} occurs in theta: {to_text(theta)}")
    for lit in eta:
        if isinstance(lit, Rel) and arity is not None and len(lit.args) != arity:
            raise _u_error(f"{to_text(lit)} does not match arity {arity}")
        if isinstance(lit, Rel) and len(lit.args) != len(ys):
            raise _u_error(f"{to_text(lit)} does not match the arity of the guard")
    return USentence(tuple(xs), tuple(eta), tuple(ys), theta, rel)


def _is_guarded_block(f, rel) -> bool:
    try:
        _split_block(f, rel)
    except USentenceError:
        return False
    return True


def _disjuncts(f) -> list:
    if isinstance(f, Or):
        return _disjuncts(f.left) + _disjuncts(f.right)
    return [f]


def _split_block(f, rel):
    ys = []
    while isinstance(f, Forall):
        ys.append(f.var)
        f = f.body
    if not isinstance(f, Or):
        raise _u_error("shape mismatch: universal block must end in an implication")
    want = tuple(Var(y) for y in ys)
    parts = _disjuncts(f)
    for i, guard in enumerate(parts):
        if isinstance(guard, Rel) and guard.name == rel and not guard.positive and guard.args == want:
            if len(set(ys)) != len(ys):
                raise _u_error("universal variables must be distinct")
            rest = parts[:i] + parts[i + 1:]
            theta = rest[0]
            for g in rest[1:]:
                theta = Or(theta, g)
            return tuple(ys), guard, theta
    raise _u_error(f"shape mismatch: guard !{rel}(ys) over exactly the universal variables not found")
