"""Registry of dependency atoms and their closure metadata."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Iterable

from .syntax import (
    BUILTIN_GROUPS,
    BUILTIN_TAGS,
    And,
    Atom,
    Closure,
    DependencySpec,
    Eq,
    Formula,
    Or,
    Rel,
    TeamlabError,
    Var,
    conj,
    constant_names,
    exists_block,
    forall_block,
    free_variables,
    is_first_order,
    parse_formula,
    subformulas,
    to_text,
)


class RegistryError(TeamlabError):
    pass


# Closure rows: empty team, downwards, union, upwards, domain independence.
TABLE1 = {
    "dep": "++--+",
    "inc": "+-+-+",
    "exc": "++--+",
    "anon": "+-+-+",
    "indep": "+---+",
    "ne": "---++",
    "all": "---+-",
}
# constancy is not a row of the published table; its row is what the probes confirm
EXTRA_ROWS = {"const": "++--+"}
TABLE1_ORDER = ("dep", "inc", "exc", "anon", "indep", "ne", "all")
DEFAULT_SPLITS = {
    "dep": (1, 1), "inc": (1, 1), "exc": (1, 1), "anon": (1, 1), "indep": (1, 1),
    "ne": (1,), "const": (1,), "all": (1,),
}


def _vs(prefix: str, k: int) -> list:
    return [f"{prefix}{i}" for i in range(1, k + 1)]


def _r(names, positive=True) -> Rel:
    return Rel("R", tuple(Var(v) for v in names), positive)


def _any_differs(xs, ys) -> Formula:
    out = Eq(Var(xs[0]), Var(ys[0]), False)
    for a, b in zip(xs[1:], ys[1:]):
        out = Or(out, Eq(Var(a), Var(b), False))
    return out


def _all_equal(xs, ys) -> Formula:
    return conj(*(Eq(Var(a), Var(b)) for a, b in zip(xs, ys)))


def defining_sentence(tag: str, split: tuple) -> Formula:
    """The first-order sentence over ``{R}`` defining a built-in dependency."""
    if tag in ("dep", "anon", "indep"):
        k1, k2 = split
        a, b, c, d = _vs("a", k1), _vs("b", k2), _vs("c", k2), _vs("d", k2)
        if tag == "dep":
            body = Or(_r(a + b, False), _r(a + c, False))
            if k2:
                body = Or(body, _all_equal(b, c))
            else:
                body = Or(body, _r(a + b))
            return forall_block(a + b + c, body)
        if tag == "anon":
            if not k2:
                return forall_block(a, _r(a, False))
            return forall_block(a + b, Or(_r(a + b, False), exists_block(c, And(_r(a + c), _any_differs(c, b)))))
        c = _vs("c", k1)
        return forall_block(a + b + c + d, Or(Or(_r(a + b, False), _r(c + d, False)), _r(a + d)))
    if tag in ("inc", "exc"):
        k = split[0]
        a, b, c = _vs("a", k), _vs("b", k), _vs("c", k)
        if tag == "inc":
            return forall_block(a + b, Or(_r(a + b, False), exists_block(c, _r(c + a))))
        return forall_block(a + b + c, Or(_r(a + b, False), _r(c + a, False)))
    (k,) = split
    a, b = _vs("a", k), _vs("b", k)
    if tag == "ne":
        return exists_block(a, _r(a))
    if tag == "all":
        return forall_block(a, _r(a))
    if tag == "const":
        body = Or(_r(a, False), _r(b, False))
        body = Or(body, _all_equal(a, b) if k else _r(a))
        return forall_block(a + b, body)
    raise RegistryError(f"unknown built-in {tag!r}")


@lru_cache(maxsize=None)
def builtin_spec(tag: str, split: tuple | None = None) -> DependencySpec:
    if tag not in BUILTIN_TAGS:
        raise RegistryError(f"unknown built-in dependency {tag!r}")
    split = tuple(split) if split is not None else DEFAULT_SPLITS[tag]
    if len(split) != BUILTIN_GROUPS[tag]:
        raise RegistryError(f"{tag} takes {BUILTIN_GROUPS[tag]} argument group(s), got split {split}")
    if tag in ("inc", "exc") and split[0] != split[1]:
        raise RegistryError(f"both sides of {tag} must have the same length")
    if any(k < 0 for k in split):
        raise RegistryError("negative arity")
    row = TABLE1.get(tag) or EXTRA_ROWS[tag]
    return DependencySpec(
        name=tag,
        arity=sum(split),
        tag=tag,
        split=split,
        sentence=defining_sentence(tag, split),
        closure=Closure.from_row(row),
    )


def check_dependency_sentence(sentence: Formula, arity: int, symbol: str = "R") -> None:
    if free_variables(sentence):
        raise RegistryError(f"dependency sentence has free variables {sorted(free_variables(sentence))}")
    if not is_first_order(sentence):
        raise RegistryError("dependency sentence must be first order")
    if constant_names(sentence):
        raise RegistryError(f"dependency sentence may not use constants: {sorted(constant_names(sentence))}")
    for g in subformulas(sentence):
        if isinstance(g, Rel):
            if g.name != symbol:
                raise RegistryError(f"relation {g.name!r} is outside the signature {{{symbol}}}")
            if len(g.args) != arity:
                raise RegistryError(f"{to_text(g)} does not have arity {arity}")


class Registry:
    """Dependency table: built-in families plus user-registered first-order dependencies."""

    def __init__(self, specs: Iterable[DependencySpec] = ()):
        self._user: dict = {}
        for s in specs:
            self._user[s.name] = s

    def __contains__(self, name: str) -> bool:
        return name in BUILTIN_TAGS or name in self._user

    def names(self) -> list:
        return list(BUILTIN_TAGS) + sorted(self._user)

    def arities(self) -> dict:
        return {name: s.arity for name, s in self._user.items()}

    def register(self, name: str, arity: int, sentence: Formula | str) -> DependencySpec:
        if name in self:
            raise RegistryError(f"dependency {name!r} is already registered")
        if not name.isidentifier() or name.startswith("_"):
            raise RegistryError(f"invalid dependency name {name!r}")
        if arity < 0:
            raise RegistryError("arity must be nonnegative")
        if isinstance(sentence, str):
            sentence = parse_formula(sentence)
        check_dependency_sentence(sentence, arity)
        spec = DependencySpec(name=name, arity=arity, tag="fo", split=(arity,), sentence=sentence)
        self._user[name] = spec
        return spec

    def spec(self, name: str, split: tuple | None = None) -> DependencySpec:
        if name in BUILTIN_TAGS:
            return builtin_spec(name, split)
        try:
            spec = self._user[name]
        except KeyError:
            raise RegistryError(f"unknown dependency {name!r}") from None
        if split is not None and tuple(split) != spec.split:
            raise RegistryError(f"{name} has arity {spec.arity}")
        return spec

    def spec_for_atom(self, atom: Atom) -> DependencySpec:
        return self.spec(atom.name, tuple(len(g) for g in atom.groups))

    def metadata(self, name: str) -> Closure:
        return self.spec(name).closure

    def parse(self, text: str, constants=(), allow_reserved: bool = False) -> Formula:
        return parse_formula(text, self.arities(), constants, allow_reserved)

    def load(self, text: str) -> list:
        """Register every ``dep NAME ARITY := SENTENCE`` line of ``text``."""
        out = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, sep, body = line.partition(":=")
            parts = head.split()
            if not sep or len(parts) != 3 or parts[0] != "dep" or not parts[2].isdigit():
                raise RegistryError(f"line {lineno}: expected 'dep NAME ARITY := SENTENCE'")
            out.append(self.register(parts[1], int(parts[2]), body.strip()))
        return out

    def load_file(self, path) -> list:
        return self.load(Path(path).read_text(encoding="utf-8"))


def parse_dependency_ref(text: str) -> tuple:
    """Read ``dep``, ``dep(1;2)`` or ``ne(0)`` into ``(name, split or None)``."""
    text = text.strip()
    if "(" not in text:
        return text, None
    name, _, rest = text.partition("(")
    rest = rest.rstrip(")")
    split = tuple(int(p) for p in rest.replace(",", ";").split(";") if p.strip() != "")
    return name.strip(), split
