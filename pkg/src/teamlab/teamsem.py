"""Team semantics with lax disjunction and set-valued existential choice.

Two evaluators share one set of rules:

* :class:`TeamEvaluator` decides ``M |=_X phi`` for one team by search.
  With ``prune=False`` it enumerates covers and choice functions exactly as
  the rules state them.  With ``prune=True`` it narrows those searches using
  closure facts that are known for the subformula at hand (downwards
  closure, forced constancy) and a few exact shortcuts.
* :class:`FamilyEvaluator` computes, for a small variable domain, the whole
  family of satisfying teams at once as a boolean array indexed by team
  bitmask.  Split disjunction becomes a union-product computed with
  subset-sum transforms.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from dataclasses import dataclass

import numpy as np

from .atoms import Registry
from .model import (
    EMPTY_ASSIGNMENT_TEAM,
    Relation,
    ResourceLimitError,
    Structure,
    Team,
    all_tuples,
    bits,
    submasks,
)
from .syntax import (
    And,
    Atom,
    Eq,
    Exists,
    Flag,
    Forall,
    GOr,
    Or,
    Rel,
    TeamlabError,
    free_variables,
    is_first_order,
    to_text,
)
from .tarski import dep_membership, eval_tarski

GOOD_MASK_SLOTS = 4096


class TeamSemanticsError(TeamlabError):
    pass


@dataclass(frozen=True)
class KnownClosure:
    """Closure properties of a formula that follow from its atoms."""

    empty: bool
    down: bool
    union: bool


def known_closure(phi, registry: Registry) -> KnownClosure:
    """Closure facts inherited from the atoms, by induction on the formula.

    Literals have all three properties; every connective preserves them,
    except that global disjunction does not preserve union closure.
    """
    if isinstance(phi, (Rel, Eq)):
        return KnownClosure(True, True, True)
    if isinstance(phi, Atom):
        c = registry.spec_for_atom(phi).closure
        return KnownClosure(c.empty is Flag.YES, c.down is Flag.YES, c.union is Flag.YES)
    if isinstance(phi, (And, Or, GOr)):
        a, b = known_closure(phi.left, registry), known_closure(phi.right, registry)
        return KnownClosure(a.empty and b.empty, a.down and b.down,
                            a.union and b.union and not isinstance(phi, GOr))
    if isinstance(phi, (Exists, Forall)):
        return known_closure(phi.body, registry)
    raise TeamSemanticsError(f"not a formula: {phi!r}")


def singleton_witnessed(phi, registry: Registry) -> bool:
    """True if every nonempty team satisfying ``phi`` has a satisfying singleton subteam."""
    if isinstance(phi, Atom) and phi.name == "ne":
        return True
    if known_closure(phi, registry).down:
        return True
    if isinstance(phi, And):
        return (singleton_witnessed(phi.left, registry) and known_closure(phi.right, registry).down) or \
            (singleton_witnessed(phi.right, registry) and known_closure(phi.left, registry).down)
    if isinstance(phi, GOr):
        return singleton_witnessed(phi.left, registry) and singleton_witnessed(phi.right, registry)
    return False


def forces_constant(phi, v: str) -> bool:
    """True if every team satisfying ``phi`` gives ``v`` at most one value."""
    if isinstance(phi, Atom):
        if phi.name == "const":
            return v in phi.args
        if phi.name == "dep" and not phi.groups[0]:
            return v in phi.groups[1]
        return False
    if isinstance(phi, And):
        return forces_constant(phi.left, v) or forces_constant(phi.right, v)
    if isinstance(phi, GOr):
        return forces_constant(phi.left, v) and forces_constant(phi.right, v)
    if isinstance(phi, (Exists, Forall)):
        return phi.var != v and forces_constant(phi.body, v)
    return False


class _Layout:
    """Slot arithmetic for teams with a fixed variable tuple over ``0..n-1``."""

    def __init__(self, n: int, variables: tuple):
        self.n = n
        self.vars = variables
        self.width = len(variables)
        self.slots = n ** self.width
        self._rows = None

    def row(self, i: int) -> tuple:
        if self._rows is None and self.slots <= GOOD_MASK_SLOTS:
            self._rows = all_tuples(self.n, self.width)
        if self._rows is not None:
            return self._rows[i]
        out = []
        for _ in range(self.width):
            i, a = divmod(i, self.n)
            out.append(a)
        return tuple(reversed(out))


class TeamEvaluator:
    """Decides team satisfaction over one structure.

    The memo table lives as long as the evaluator; :func:`eval_team` builds a
    fresh one per call.
    """

    def __init__(self, M: Structure, registry: Registry | None = None, prune: bool = True):
        self.M = M
        self.n = M.n
        self.registry = registry or Registry()
        self.prune = prune
        self.memo: dict = {}
        self._layouts: dict = {}
        self._good: dict = {}
        self._closure: dict = {}
        self._forced: dict = {}
        self._membership: dict = {}
        self._alive: list = []

    # -- public -----------------------------------------------------------

    def holds(self, team: Team, phi) -> bool:
        variables, mask = self._prepare(team, phi)
        return self._eval(phi, variables, mask)

    def explain(self, team: Team, phi) -> dict:
        """A derivation tree: the witnessing covers and choice teams per rule."""
        variables, mask = self._prepare(team, phi)
        return self._explain(phi, variables, mask)

    # -- plumbing ---------------------------------------------------------

    def _prepare(self, team: Team, phi):
        self._alive.append(phi)
        missing = free_variables(phi) - set(team.vars)
        if missing:
            if team.rows:
                raise TeamSemanticsError(
                    f"free variables {sorted(missing)} are not in the team domain {team.vars}")
            team = Team(team.vars + tuple(sorted(missing)), frozenset())
        return team.vars, team.mask(self.n)

    def layout(self, variables: tuple) -> _Layout:
        lay = self._layouts.get(variables)
        if lay is None:
            lay = self._layouts[variables] = _Layout(self.n, variables)
        return lay

    def rows(self, variables, mask):
        lay = self.layout(variables)
        return [lay.row(i) for i in bits(mask)]

    def team(self, variables, mask) -> Team:
        return Team(variables, frozenset(self.rows(variables, mask)))

    def closure(self, phi) -> KnownClosure:
        key = id(phi)
        c = self._closure.get(key)
        if c is None:
            c = self._closure[key] = known_closure(phi, self.registry)
        return c

    def _good_mask(self, lit, variables) -> int:
        key = (id(lit), variables)
        g = self._good.get(key)
        if g is None:
            lay = self.layout(variables)
            g = 0
            for i in range(lay.slots):
                if eval_tarski(self.M, dict(zip(variables, lay.row(i))), lit):
                    g |= 1 << i
            self._good[key] = g
        return g

    def _literal(self, lit, variables, mask) -> bool:
        if not mask:
            return True
        lay = self.layout(variables)
        if lay.slots <= GOOD_MASK_SLOTS:
            return mask & ~self._good_mask(lit, variables) == 0
        return all(eval_tarski(self.M, dict(zip(variables, lay.row(i))), lit) for i in bits(mask))

    def _atom(self, atom, variables, mask) -> bool:
        spec = self.registry.spec_for_atom(atom)
        try:
            idx = [variables.index(v) for v in atom.args]
        except ValueError:
            raise TeamSemanticsError(f"atom {to_text(atom)} uses variables outside {variables}") from None
        tuples = frozenset(tuple(r[i] for i in idx) for r in self.rows(variables, mask))
        key = (spec, tuples)
        out = self._membership.get(key)
        if out is None:
            out = self._membership[key] = dep_membership(spec, self.n, Relation(spec.arity, tuples))
        return out

    # quantifier helpers

    def _classes(self, v, variables, mask):
        """Group the rows of ``mask`` by their values off ``v``; return new vars and per-class image slots."""
        n = self.n
        lay = self.layout(variables)
        if v in variables:
            pos = variables.index(v)
            step = n ** (len(variables) - 1 - pos)
            classes = {}
            for i in bits(mask):
                base = i - lay.row(i)[pos] * step
                classes[base] = [base + m * step for m in range(n)]
            return variables, list(classes.values())
        new = variables + (v,)
        return new, [[i * n + m for m in range(n)] for i in bits(mask)]

    def _universal(self, v, variables, mask):
        new, classes = self._classes(v, variables, mask)
        out = 0
        for images in classes:
            for s in images:
                out |= 1 << s
        return new, out

    def _choice_candidates(self, body, v, variables, mask):
        new, classes = self._classes(v, variables, mask)
        n = self.n
        if not classes:
            yield new, 0
            return
        if self.prune and self._forces(body, v):
            for m in range(n):
                out = 0
                for images in classes:
                    out |= 1 << images[m]
                yield new, out
            return
        if self.prune and self.closure(body).down:
            options = range(n)
            pick = lambda images, m: 1 << images[m]
        else:
            options = range(1, 1 << n)
            pick = lambda images, sub: sum(1 << images[m] for m in range(n) if sub >> m & 1)
        per_class = [[pick(images, o) for o in options] for images in classes]
        for combo in itertools.product(*per_class):
            out = 0
            for part in combo:
                out |= part
            yield new, out

    def _forces(self, body, v) -> bool:
        key = (id(body), v)
        f = self._forced.get(key)
        if f is None:
            f = self._forced[key] = forces_constant(body, v)
        return f

    # -- rules ------------------------------------------------------------

    def _eval(self, phi, variables, mask) -> bool:
        key = (id(phi), variables, mask)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out = self._rule(phi, variables, mask)
        self.memo[key] = out
        return out

    def _rule(self, phi, variables, mask) -> bool:
        if isinstance(phi, (Rel, Eq)):
            return self._literal(phi, variables, mask)
        if isinstance(phi, Atom):
            return self._atom(phi, variables, mask)
        if isinstance(phi, And):
            return self._eval(phi.left, variables, mask) and self._eval(phi.right, variables, mask)
        if isinstance(phi, GOr):
            return self._eval(phi.left, variables, mask) or self._eval(phi.right, variables, mask)
        if isinstance(phi, Or):
            return self._split(phi, variables, mask) is not None
        if isinstance(phi, Forall):
            new, ext = self._universal(phi.var, variables, mask)
            return self._eval(phi.body, new, ext)
        if isinstance(phi, Exists):
            return self._choose(phi, variables, mask) is not None
        raise TeamSemanticsError(f"not a formula: {phi!r}")

    def _choose(self, phi, variables, mask):
        for new, y in self._choice_candidates(phi.body, phi.var, variables, mask):
            if self._eval(phi.body, new, y):
                return new, y
        return None

    def _split(self, phi, variables, mask):
        """A cover ``(Y, Z)`` of ``mask`` witnessing the disjunction, or None."""
        left, right = phi.left, phi.right
        ev = self._eval
        if not self.prune:
            for y in submasks(mask):
                if not ev(left, variables, y):
                    continue
                rest = mask & ~y
                for extra in submasks(y):
                    if ev(right, variables, rest | extra):
                        return y, rest | extra
            return None
        if ev(left, variables, mask):
            z = self._some_subteam(right, variables, mask)
            return None if z is None else (mask, z)
        if ev(right, variables, mask):
            y = self._some_subteam(left, variables, mask)
            return None if y is None else (y, mask)
        cl, cr = self.closure(left), self.closure(right)
        for a, b, ca, cb, swap in ((left, right, cl, cr, False), (right, left, cr, cl, True)):
            if ca.empty and ca.down and ca.union and cb.down:
                # the largest subteam satisfying a is the union of its satisfying singletons,
                # and b, being downwards closed, only has to cover what is left over
                best = 0
                for i in bits(mask):
                    if ev(a, variables, 1 << i):
                        best |= 1 << i
                rest = mask & ~best
                if not ev(b, variables, rest):
                    return None
                return (rest, best) if swap else (best, rest)
        if cl.down and cr.down:
            for y in submasks(mask):
                if ev(left, variables, y) and ev(right, variables, mask & ~y):
                    return y, mask & ~y
            return None
        return self._split_by_families(left, right, variables, mask)

    def _some_subteam(self, phi, variables, mask):
        """Some subteam of ``mask`` satisfying ``phi``, smallest candidates first."""
        if self._eval(phi, variables, 0):
            return 0
        for i in bits(mask):
            if self._eval(phi, variables, 1 << i):
                return 1 << i
        key = ("sw", id(phi))
        known = self._forced.get(key)
        if known is None:
            known = self._forced[key] = singleton_witnessed(phi, self.registry)
        if known:
            return None
        for z in submasks(mask):
            if self._eval(phi, variables, z):
                return z
        return None

    def _split_by_families(self, left, right, variables, mask):
        members = list(bits(mask))
        k = len(members)
        size = 1 << k
        glob = [0] * size
        for local in range(1, size):
            low = local & -local
            glob[local] = glob[local ^ low] | (1 << members[low.bit_length() - 1])
        right_ok = [self._eval(right, variables, g) for g in glob]
        # up[l]: some Z with l <= Z <= mask satisfies the right disjunct
        up = right_ok[:]
        for i in range(k):
            b = 1 << i
            for local in range(size):
                if not local & b and up[local | b]:
                    up[local] = True
        full = size - 1
        for local in range(size):
            if up[full ^ local] and self._eval(left, variables, glob[local]):
                need = full ^ local
                for z in range(size):
                    if z & need == need and right_ok[z]:
                        return glob[local], glob[z]
        return None

    # -- explanations -------------------------------------------------------

    def _explain(self, phi, variables, mask) -> dict:
        holds = self._eval(phi, variables, mask)
        node = {
            "formula": to_text(phi),
            "team": str(self.team(variables, mask)),
            "holds": holds,
        }
        if not holds:
            return node
        if isinstance(phi, (Rel, Eq)):
            node["rule"] = "literal"
        elif isinstance(phi, Atom):
            node["rule"] = "atom"
        elif isinstance(phi, And):
            node["rule"] = "and"
            node["children"] = [self._explain(phi.left, variables, mask), self._explain(phi.right, variables, mask)]
        elif isinstance(phi, GOr):
            node["rule"] = "gor"
            side = phi.left if self._eval(phi.left, variables, mask) else phi.right
            node["children"] = [self._explain(side, variables, mask)]
        elif isinstance(phi, Or):
            node["rule"] = "or"
            y, z = self._split(phi, variables, mask)
            node["children"] = [self._explain(phi.left, variables, y), self._explain(phi.right, variables, z)]
        elif isinstance(phi, Forall):
            node["rule"] = "forall"
            new, ext = self._universal(phi.var, variables, mask)
            node["children"] = [self._explain(phi.body, new, ext)]
        elif isinstance(phi, Exists):
            node["rule"] = "exists"
            new, y = self._choose(phi, variables, mask)
            node["children"] = [self._explain(phi.body, new, y)]
        return node


def eval_team(M: Structure, X: Team, phi, registry: Registry | None = None, prune: bool = True) -> bool:
    """``M |=_X phi`` under lax team semantics."""
    return TeamEvaluator(M, registry, prune).holds(X, phi)


def sentence_true(M: Structure, phi, registry: Registry | None = None) -> bool:
    """Truth of a sentence: satisfaction by the team holding only the empty assignment."""
    return eval_team(M, EMPTY_ASSIGNMENT_TEAM, phi, registry)


def check_flatness(M: Structure, X: Team, phi, registry: Registry | None = None, prune: bool = True) -> bool:
    """Whether team truth of a first-order ``phi`` equals truth at every assignment."""
    if not is_first_order(phi):
        raise TeamSemanticsError("flatness is only claimed for first-order formulas")
    pointwise = all(eval_tarski(M, s, phi) for s in X.assignments())
    return eval_team(M, X, phi, registry, prune) == pointwise


# ---------------------------------------------------------------------------
# whole-family evaluation

FAMILY_SLOT_CAP = 16


def _or_map(contrib) -> np.ndarray:
    """``out[T] = OR of contrib[i] over the set bits i of T``."""
    out = np.zeros(1, dtype=np.int64)
    for c in contrib:
        out = np.concatenate([out, out | np.int64(c)])
    return out


def _zeta(f: np.ndarray, slots: int) -> np.ndarray:
    f = f.copy()
    for i in range(slots):
        view = f.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]
    return f


def _mobius(f: np.ndarray, slots: int) -> np.ndarray:
    f = f.copy()
    for i in range(slots):
        view = f.reshape(-1, 2, 1 << i)
        view[:, 1, :] -= view[:, 0, :]
    return f


def union_product(a: np.ndarray, b: np.ndarray, slots: int) -> np.ndarray:
    """Family ``{Y | Z : Y in a, Z in b}`` for boolean families over ``slots`` bits."""
    za = _zeta(a.astype(np.int64), slots)
    zb = _zeta(b.astype(np.int64), slots)
    return _mobius(za * zb, slots) > 0


class FamilyEvaluator:
    """Satisfying-team families over one structure, for domains of at most 16 slots."""

    def __init__(self, M: Structure, registry: Registry | None = None, cap: int = FAMILY_SLOT_CAP):
        self.M = M
        self.n = M.n
        self.registry = registry or Registry()
        self.cap = cap
        self._maps: dict = {}
        self._memo: dict = {}

    def family(self, variables, phi) -> np.ndarray:
        """Boolean array ``F`` with ``F[mask]`` true iff the team ``mask`` satisfies ``phi``."""
        variables = tuple(variables)
        missing = free_variables(phi) - set(variables)
        if missing:
            raise TeamSemanticsError(f"free variables {sorted(missing)} are not in {variables}")
        return self._family(phi, variables)

    def _slots(self, variables) -> int:
        slots = self.n ** len(variables)
        if slots > self.cap:
            raise ResourceLimitError(f"{slots} slots for variables {variables} exceeds the family cap {self.cap}")
        return slots

    def _teams(self, slots):
        return np.arange(1 << slots, dtype=np.int64)

    def _family(self, phi, variables) -> np.ndarray:
        key = (phi, variables)
        out = self._memo.get(key)
        if out is None:
            out = self._memo[key] = self._compute(phi, variables)
        return out

    def _compute(self, phi, variables) -> np.ndarray:
        slots = self._slots(variables)
        if isinstance(phi, (Rel, Eq)):
            good = 0
            for i, row in enumerate(all_tuples(self.n, len(variables))):
                if eval_tarski(self.M, dict(zip(variables, row)), phi):
                    good |= 1 << i
            return (self._teams(slots) & ~np.int64(good)) == 0
        if isinstance(phi, Atom):
            return self._atom(phi, variables, slots)
        if isinstance(phi, And):
            return self._family(phi.left, variables) & self._family(phi.right, variables)
        if isinstance(phi, GOr):
            return self._family(phi.left, variables) | self._family(phi.right, variables)
        if isinstance(phi, Or):
            return union_product(self._family(phi.left, variables), self._family(phi.right, variables), slots)
        if isinstance(phi, (Exists, Forall)):
            v = phi.var
            if v in variables:
                inner = self._family(phi.body, variables)
                cyl = self._cylinder(variables, v)
                if isinstance(phi, Forall):
                    return inner[cyl]
                return np.isin(cyl, cyl[inner])
            new = variables + (v,)
            inner = self._family(phi.body, new)
            if isinstance(phi, Forall):
                return inner[self._extension(variables)]
            out = np.zeros(1 << slots, dtype=bool)
            out[self._projection(variables)[inner]] = True
            return out
        raise TeamSemanticsError(f"not a formula: {phi!r}")

    def _cylinder(self, variables, v) -> np.ndarray:
        key = ("cyl", variables, v)
        if key not in self._maps:
            n = self.n
            pos = variables.index(v)
            step = n ** (len(variables) - 1 - pos)
            contrib = []
            for i, row in enumerate(all_tuples(n, len(variables))):
                base = i - row[pos] * step
                contrib.append(sum(1 << (base + m * step) for m in range(n)))
            self._maps[key] = _or_map(contrib)
        return self._maps[key]

    def _extension(self, variables) -> np.ndarray:
        key = ("ext", variables)
        if key not in self._maps:
            n = self.n
            full = (1 << n) - 1
            self._maps[key] = _or_map([full << (i * n) for i in range(n ** len(variables))])
        return self._maps[key]

    def _projection(self, variables) -> np.ndarray:
        """Map teams over ``variables + (v,)`` to their restriction to ``variables``."""
        key = ("proj", variables)
        if key not in self._maps:
            n = self.n
            self._maps[key] = _or_map([1 << (j // n) for j in range(n ** (len(variables) + 1))])
        return self._maps[key]

    def _atom(self, atom, variables, slots) -> np.ndarray:
        spec = self.registry.spec_for_atom(atom)
        idx = tuple(variables.index(v) for v in atom.args)
        return _atom_family(spec, self.n, idx, len(variables))


@lru_cache(maxsize=4096)
def _atom_family(spec, n: int, idx: tuple, width: int) -> np.ndarray:
    """Family of an atom; it depends on the domain size only, never on the relations."""
    # projected tuples that can occur, numbered compactly: at most n**width of them
    projected = [tuple(row[i] for i in idx) for row in all_tuples(n, width)]
    occurring = sorted(set(projected))
    number = {t: j for j, t in enumerate(occurring)}
    relmask = _or_map([1 << number[t] for t in projected])
    values, inverse = np.unique(relmask, return_inverse=True)
    table = np.array([dep_membership(spec, n, Relation(spec.arity, [occurring[j] for j in bits(int(r))]))
                      for r in values], dtype=bool)
    out = table[inverse]
    out.flags.writeable = False
    return out


def team_family(M: Structure, variables, phi, registry: Registry | None = None) -> np.ndarray:
    return FamilyEvaluator(M, registry).family(variables, phi)
