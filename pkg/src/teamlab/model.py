"""Finite structures, teams, relations, and exhaustive enumerators.

Domain elements are the integers ``0 .. n-1``.  Relations and teams are kept
as frozensets of tuples at the API surface; the enumerators and the
evaluators index tuples lexicographically (first coordinate most
significant) so that a relation over ``n`` elements of arity ``k`` is also a
bitmask over ``n**k`` positions.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .syntax import TeamlabError

DEFAULT_CAP = 16


class ResourceLimitError(TeamlabError):
    pass


class ModelError(TeamlabError):
    pass


@lru_cache(maxsize=None)
def all_tuples(n: int, k: int) -> tuple:
    """All ``k``-tuples over ``0..n-1`` in lexicographic order."""
    return tuple(itertools.product(range(n), repeat=k))


def tuple_index(t: Sequence[int], n: int) -> int:
    i = 0
    for a in t:
        i = i * n + a
    return i


def bits(mask: int) -> Iterator[int]:
    """Indices of the set bits of ``mask``, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask`` in ascending numeric order."""
    members = list(bits(mask))
    for i in range(1 << len(members)):
        sub = 0
        j = 0
        while i:
            if i & 1:
                sub |= 1 << members[j]
            i >>= 1
            j += 1
        yield sub


def _guard(n: int, k: int, cap: int) -> int:
    if n < 0 or k < 0:
        raise ValueError("domain size and arity must be nonnegative")
    slots = n ** k
    if slots > cap:
        raise ResourceLimitError(f"{n}^{k} = {slots} tuple positions exceeds the cap of {cap}")
    return slots


@dataclass(frozen=True)
class Relation:
    arity: int
    tuples: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(tuple(t) for t in self.tuples))
        for t in self.tuples:
            if len(t) != self.arity:
                raise ModelError(f"tuple {t} does not have arity {self.arity}")

    @classmethod
    def from_mask(cls, n: int, k: int, mask: int) -> "Relation":
        tuples = all_tuples(n, k)
        return cls(k, frozenset(tuples[i] for i in bits(mask)))

    def mask(self, n: int) -> int:
        out = 0
        for t in self.tuples:
            out |= 1 << tuple_index(t, n)
        return out

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(sorted(self.tuples))

    def __contains__(self, t):
        return tuple(t) in self.tuples

    def __or__(self, other: "Relation") -> "Relation":
        return Relation(self.arity, self.tuples | other.tuples)

    def __le__(self, other: "Relation") -> bool:
        return self.tuples <= other.tuples

    def __str__(self):
        return "{" + ", ".join("(" + ",".join(map(str, t)) + ")" for t in self) + "}"


def fld(r: Relation) -> frozenset:
    """Elements occurring in some tuple of ``r``."""
    return frozenset(a for t in r.tuples for a in t)


def relabel(r: Relation, elements: Iterable[int]) -> Relation:
    """Rename ``elements`` (sorted) to ``0..m-1`` inside ``r``."""
    index = {a: i for i, a in enumerate(sorted(elements))}
    return Relation(r.arity, frozenset(tuple(index[a] for a in t) for t in r.tuples))


@dataclass(frozen=True)
class Structure:
    """A finite structure with domain ``0..n-1``.

    ``pred`` names the distinguished unary predicate used for relativization;
    its extension lives in ``relations`` like any other relation.
    """

    n: int
    relations: Mapping[str, Relation] = field(default_factory=dict)
    constants: Mapping[str, int] = field(default_factory=dict)
    pred: str | None = None
    labels: tuple | None = None

    def __post_init__(self):
        if self.n < 0:
            raise ModelError("domain size must be nonnegative")
        object.__setattr__(self, "relations", dict(self.relations))
        object.__setattr__(self, "constants", dict(self.constants))
        for name, r in self.relations.items():
            for t in r.tuples:
                if any(not 0 <= a < self.n for a in t):
                    raise ModelError(f"relation {name}: tuple {t} leaves the domain 0..{self.n - 1}")
        for name, a in self.constants.items():
            if not 0 <= a < self.n:
                raise ModelError(f"constant {name} = {a} leaves the domain 0..{self.n - 1}")
        if self.pred is not None:
            p = self.relations.get(self.pred)
            if p is None or p.arity != 1:
                raise ModelError(f"distinguished predicate {self.pred!r} must be a unary relation")
        if self.labels is not None and len(self.labels) != self.n:
            raise ModelError("one label per domain element required")

    @property
    def domain(self) -> range:
        return range(self.n)

    @property
    def pred_elements(self) -> frozenset:
        if self.pred is None:
            raise ModelError("structure has no distinguished predicate")
        return frozenset(t[0] for t in self.relations[self.pred].tuples)

    def with_relation(self, name: str, r: Relation) -> "Structure":
        rels = dict(self.relations)
        rels[name] = r
        return Structure(self.n, rels, self.constants, self.pred, self.labels)

    def with_constants(self, **values: int) -> "Structure":
        consts = dict(self.constants)
        consts.update(values)
        return Structure(self.n, self.relations, consts, self.pred, self.labels)

    def label(self, a: int) -> str:
        return self.labels[a] if self.labels else str(a)

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.relations.items(), key=lambda kv: kv[0])),
                     tuple(sorted(self.constants.items())), self.pred))

    def __eq__(self, other):
        if not isinstance(other, Structure):
            return NotImplemented
        return (self.n, self.relations, self.constants, self.pred) == (
            other.n, other.relations, other.constants, other.pred)


@dataclass(frozen=True)
class Team:
    """A set of assignments sharing the variable domain ``vars``.

    Each row is the tuple of values of ``vars`` in order.
    """

    vars: tuple
    rows: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "rows", frozenset(tuple(r) for r in self.rows))
        if len(set(self.vars)) != len(self.vars):
            raise ModelError(f"duplicate variables in team domain {self.vars}")
        for r in self.rows:
            if len(r) != len(self.vars):
                raise ModelError(f"assignment {r} is not total on {self.vars}")

    @classmethod
    def from_assignments(cls, assignments: Iterable[Mapping[str, int]], variables: Sequence[str] | None = None) -> "Team":
        assignments = [dict(a) for a in assignments]
        if variables is None:
            variables = sorted(assignments[0]) if assignments else ()
        variables = tuple(variables)
        rows = set()
        for a in assignments:
            if set(a) != set(variables):
                raise ModelError(f"assignment {a} does not have domain {set(variables)}")
            rows.add(tuple(a[v] for v in variables))
        return cls(variables, frozenset(rows))

    @classmethod
    def from_mask(cls, n: int, variables: Sequence[str], mask: int) -> "Team":
        rows = all_tuples(n, len(variables))
        return cls(tuple(variables), frozenset(rows[i] for i in bits(mask)))

    def mask(self, n: int) -> int:
        out = 0
        for r in self.rows:
            out |= 1 << tuple_index(r, n)
        return out

    def assignments(self) -> list:
        return [dict(zip(self.vars, r)) for r in sorted(self.rows)]

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.assignments())

    def __le__(self, other: "Team") -> bool:
        return self.vars == other.vars and self.rows <= other.rows

    def __or__(self, other: "Team") -> "Team":
        if self.vars != other.vars:
            raise ModelError("teams with different domains")
        return Team(self.vars, self.rows | other.rows)

    def __str__(self):
        if not self.rows:
            return "{}"
        if not self.vars:
            return "{eps}"
        return "{" + "; ".join(",".join(f"{v}={a}" for v, a in zip(self.vars, r)) for r in sorted(self.rows)) + "}"


EMPTY_ASSIGNMENT_TEAM = Team((), frozenset({()}))


def team_projection(team: Team, variables: Sequence[str]) -> Relation:
    """The relation ``X(v)`` = {s(v) : s in X}; repeated variables allowed."""
    try:
        idx = [team.vars.index(v) for v in variables]
    except ValueError:
        missing = [v for v in variables if v not in team.vars]
        raise ModelError(f"unknown variable(s) {missing} for team over {team.vars}") from None
    return Relation(len(idx), frozenset(tuple(r[i] for i in idx) for r in team.rows))


def _rebind(team: Team, v: str) -> tuple:
    if v in team.vars:
        return team.vars, team.vars.index(v)
    return team.vars + (v,), len(team.vars)


def extend_universal(team: Team, v: str, structure: Structure) -> Team:
    """``X[M/v]``; an existing binding of ``v`` is overwritten."""
    variables, pos = _rebind(team, v)
    rows = set()
    for r in team.rows:
        base = list(r) + ([0] if pos == len(r) else [])
        for m in structure.domain:
            base[pos] = m
            rows.add(tuple(base))
    return Team(variables, frozenset(rows))


def extend_choice(
    team: Team,
    v: str,
    choice: Mapping[tuple, Iterable[int]] | Callable[[dict], Iterable[int]],
) -> Team:
    """``X[H/v]`` for a choice function ``H`` from assignments to nonempty sets.

    ``choice`` is either a mapping keyed by the team's row tuples or a
    callable receiving the assignment as a dict.
    """
    variables, pos = _rebind(team, v)
    rows = set()
    for r in team.rows:
        if callable(choice):
            chosen = choice(dict(zip(team.vars, r)))
        else:
            if r not in choice:
                raise ModelError(f"choice function undefined on {dict(zip(team.vars, r))}")
            chosen = choice[r]
        chosen = set(chosen)
        if not chosen:
            raise ModelError(f"choice function is empty on {dict(zip(team.vars, r))}")
        base = list(r) + ([0] if pos == len(r) else [])
        for m in chosen:
            base[pos] = m
            rows.add(tuple(base))
    return Team(variables, frozenset(rows))


def enumerate_relations(n: int, k: int, cap: int = DEFAULT_CAP) -> Iterator[Relation]:
    """All ``2**(n**k)`` relations, in increasing bitmask order."""
    if n < 1:
        raise ValueError("domain size must be at least 1")
    slots = _guard(n, k, cap)
    for mask in range(1 << slots):
        yield Relation.from_mask(n, k, mask)


def enumerate_teams(n: int, variables: Sequence[str], cap: int = DEFAULT_CAP) -> Iterator[Team]:
    """All teams with domain ``variables``, in increasing bitmask order."""
    if n < 1:
        raise ValueError("domain size must be at least 1")
    variables = tuple(variables)
    slots = _guard(n, len(variables), cap)
    for mask in range(1 << slots):
        yield Team.from_mask(n, variables, mask)


def enumerate_structures(n: int, signature: Mapping[str, int], cap: int = DEFAULT_CAP) -> Iterator[Structure]:
    """All labeled structures over ``0..n-1`` for a relational signature."""
    names = sorted(signature)
    for rels in itertools.product(*(list(enumerate_relations(n, signature[s], cap)) for s in names)):
        yield Structure(n, dict(zip(names, rels)))


def random_relation(n: int, k: int, rng: random.Random, density: float = 0.5) -> Relation:
    return Relation(k, frozenset(t for t in all_tuples(n, k) if rng.random() < density))


def random_team(n: int, variables: Sequence[str], rng: random.Random, density: float = 0.5) -> Team:
    rows = all_tuples(n, len(variables))
    return Team(tuple(variables), frozenset(r for r in rows if rng.random() < density))
