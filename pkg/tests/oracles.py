"""Independent reference implementations and generators shared by the tests.

Nothing here reuses the evaluators under test: first-order truth is computed
as satisfaction sets over a fixed variable order, team truth by literal
enumeration of covers and choice functions over Python sets.
"""

import itertools
import random

from teamlab.syntax import And, Atom, Const, Eq, Exists, Forall, GOr, Or, Rel, Var


# ---------------------------------------------------------------------------
# first-order truth by satisfaction sets


def _val(t, env, consts):
    return env[t.name] if isinstance(t, Var) else consts[t.name]


def sat_set(n, rels, consts, f, order):
    """All tuples over ``order`` (one value per variable) satisfying ``f``."""
    space = list(itertools.product(range(n), repeat=len(order)))
    pos = {v: i for i, v in enumerate(order)}

    def go(g):
        if isinstance(g, Rel):
            out = set()
            for a in space:
                env = {v: a[i] for v, i in pos.items()}
                if (tuple(_val(t, env, consts) for t in g.args) in rels[g.name]) == g.positive:
                    out.add(a)
            return out
        if isinstance(g, Eq):
            out = set()
            for a in space:
                env = {v: a[i] for v, i in pos.items()}
                if (_val(g.left, env, consts) == _val(g.right, env, consts)) == g.positive:
                    out.add(a)
            return out
        if isinstance(g, And):
            return go(g.left) & go(g.right)
        if isinstance(g, Or):
            return go(g.left) | go(g.right)
        if isinstance(g, (Exists, Forall)):
            inner = go(g.body)
            i = pos[g.var]
            out = set()
            for a in space:
                hits = [a[:i] + (m,) + a[i + 1:] in inner for m in range(n)]
                if (any(hits) if isinstance(g, Exists) else all(hits)):
                    out.add(a)
            return out
        raise TypeError(g)

    return go(f)


def textbook_truth(n, rels, consts, s, f, order):
    """Truth at assignment ``s`` (a dict over a subset of ``order``)."""
    order = tuple(order)
    a = tuple(s.get(v, 0) for v in order)
    return a in sat_set(n, rels, consts, f, order)


# ---------------------------------------------------------------------------
# team semantics by literal enumeration


def _subsets(items):
    items = list(items)
    for r in range(len(items) + 1):
        for c in itertools.combinations(items, r):
            yield frozenset(c)


def naive_team(n, rels, consts, X, f, atom_member):
    """Team truth; ``X`` is a frozenset of frozenset((var, value)) assignments.

    ``atom_member(name, groups, n, relation)`` decides atoms on projections.
    """
    if isinstance(f, (Rel, Eq)):
        for s in X:
            env = dict(s)
            if isinstance(f, Rel):
                ok = (tuple(_val(t, env, consts) for t in f.args) in rels[f.name]) == f.positive
            else:
                ok = (_val(f.left, env, consts) == _val(f.right, env, consts)) == f.positive
            if not ok:
                return False
        return True
    if isinstance(f, Atom):
        proj = {tuple(dict(s)[v] for v in f.args) for s in X}
        return atom_member(f.name, f.groups, n, proj)
    if isinstance(f, And):
        return naive_team(n, rels, consts, X, f.left, atom_member) and naive_team(n, rels, consts, X, f.right, atom_member)
    if isinstance(f, GOr):
        return naive_team(n, rels, consts, X, f.left, atom_member) or naive_team(n, rels, consts, X, f.right, atom_member)
    if isinstance(f, Or):
        for Y in _subsets(X):
            for Z in _subsets(X):
                if Y | Z == X and naive_team(n, rels, consts, Y, f.left, atom_member) \
                        and naive_team(n, rels, consts, Z, f.right, atom_member):
                    return True
        return False
    if isinstance(f, Forall):
        Y = frozenset(frozenset({**dict(s), f.var: m}.items()) for s in X for m in range(n))
        return naive_team(n, rels, consts, Y, f.body, atom_member)
    if isinstance(f, Exists):
        xs = sorted(X, key=sorted)
        choices = [c for c in _subsets(range(n)) if c]
        for H in itertools.product(choices, repeat=len(xs)):
            Y = frozenset(frozenset({**dict(s), f.var: m}.items()) for s, ms in zip(xs, H) for m in ms)
            if naive_team(n, rels, consts, Y, f.body, atom_member):
                return True
        return False
    raise TypeError(f)


def atom_member(name, groups, n, R):
    """Atom semantics written out from the team rules, independent of the library."""
    if name == "dep":
        k1 = len(groups[0])
        seen = {}
        return all(seen.setdefault(t[:k1], t[k1:]) == t[k1:] for t in R)
    if name in ("inc", "exc"):
        k = len(groups[0])
        left, right = {t[:k] for t in R}, {t[k:] for t in R}
        return left <= right if name == "inc" else not (left & right)
    if name == "anon":
        k1 = len(groups[0])
        return all(any(u[:k1] == t[:k1] and u[k1:] != t[k1:] for u in R) for t in R)
    if name == "indep":
        k1 = len(groups[0])
        return all(t[:k1] + u[k1:] in R for t in R for u in R)
    if name == "ne":
        return bool(R)
    if name == "const":
        return len(R) <= 1
    if name == "all":
        return R == set(itertools.product(range(n), repeat=len(groups[0])))
    raise KeyError(name)


def team_as_sets(team):
    return frozenset(frozenset(zip(team.vars, r)) for r in team.rows)


# ---------------------------------------------------------------------------
# generators


def random_fo(rng, variables, depth, rels=(("R", 2),), consts=(), p_leaf=0.25):
    """A random first-order NNF formula; quantifiers bind from ``variables``."""
    terms = [Var(v) for v in variables] + [Const(c) for c in consts]

    def gen(d):
        if d == 0 or rng.random() < p_leaf:
            if rels and rng.random() < 0.5:
                name, k = rng.choice(rels)
                return Rel(name, tuple(rng.choice(terms) for _ in range(k)), rng.random() < 0.5)
            return Eq(rng.choice(terms), rng.choice(terms), rng.random() < 0.5)
        c = rng.random()
        if c < 0.3:
            return And(gen(d - 1), gen(d - 1))
        if c < 0.6:
            return Or(gen(d - 1), gen(d - 1))
        return (Exists if c < 0.8 else Forall)(rng.choice(variables), gen(d - 1))

    return gen(depth)


def random_with_atoms(rng, variables, depth, atoms, gor=False, rels=(("R", 2),)):
    """Random formula mixing literals with atoms drawn from ``atoms`` (name, group sizes)."""
    terms = [Var(v) for v in variables]

    def leaf():
        if rng.random() < 0.5:
            name, sizes = rng.choice(atoms)
            return Atom(name, tuple(tuple(rng.choice(variables) for _ in range(k)) for k in sizes))
        if rels and rng.random() < 0.5:
            name, k = rng.choice(rels)
            return Rel(name, tuple(rng.choice(terms) for _ in range(k)), rng.random() < 0.5)
        return Eq(rng.choice(terms), rng.choice(terms), rng.random() < 0.5)

    def gen(d):
        if d == 0 or rng.random() < 0.25:
            return leaf()
        c = rng.random()
        if c < 0.3:
            return And(gen(d - 1), gen(d - 1))
        if c < 0.55:
            return Or(gen(d - 1), gen(d - 1))
        if gor and c < 0.65:
            return GOr(gen(d - 1), gen(d - 1))
        return (Exists if c < 0.82 else Forall)(rng.choice(variables), gen(d - 1))

    return gen(depth)


# ---------------------------------------------------------------------------
# rank-k types for the EF oracle


def equivalent_by_types(M1, M2, k):
    c = sorted(M1.constants)
    r1 = {name: set(r.tuples) for name, r in M1.relations.items()}
    r2 = {name: set(r.tuples) for name, r in M2.relations.items()}
    ar = {name: r.arity for name, r in M1.relations.items()}
    t1 = _types(M1.n, r1, ar, tuple(M1.constants[x] for x in c), k)
    t2 = _types(M2.n, r2, ar, tuple(M2.constants[x] for x in c), k)
    return t1 == t2


def _types(n, rels, ar, a, k):
    atomic = (
        frozenset((i, j) for i in range(len(a)) for j in range(len(a)) if a[i] == a[j]),
        frozenset((name, idx) for name in sorted(rels)
                  for idx in itertools.product(range(len(a)), repeat=ar[name])
                  if tuple(a[i] for i in idx) in rels[name]),
    )
    if k == 0:
        return atomic
    return atomic, frozenset(_types(n, rels, ar, a + (m,), k - 1) for m in range(n))


def seeded(seed):
    return random.Random(seed)
