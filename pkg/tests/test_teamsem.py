import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from teamlab.atoms import Registry
from teamlab.model import EMPTY_ASSIGNMENT_TEAM, Relation, Structure, Team, enumerate_teams
from teamlab.syntax import Atom, Exists, Var, parse_formula
from teamlab.teamsem import (
    FamilyEvaluator,
    TeamEvaluator,
    TeamSemanticsError,
    check_flatness,
    eval_team,
    forces_constant,
    known_closure,
    sentence_true,
    singleton_witnessed,
    team_family,
)

REG = Registry()
ATOMS = (("dep", (1, 1)), ("dep", (0, 1)), ("inc", (1, 1)), ("exc", (1, 1)), ("anon", (1, 1)),
         ("indep", (1, 1)), ("ne", (1,)), ("const", (1,)), ("all", (1,)), ("ne", (0,)))


def team(vars_, rows):
    return Team(tuple(vars_), frozenset(rows))


def test_cover_example():
    M = Structure(2, constants={"c0": 0, "c1": 1})
    phi = parse_formula("x = c0 or x = c1", constants=("c0", "c1"))
    X = team("x", {(0,), (1,)})
    assert eval_team(M, X, phi)
    tree = TeamEvaluator(M).explain(X, phi)
    assert tree["rule"] == "or" and [c["team"] for c in tree["children"]] == ["{x=0}", "{x=1}"]


@pytest.mark.parametrize("text,expected", [
    ("dep(x ; y)", False),
    ("anon(x ; y)", True),
])
def test_atom_examples(text, expected):
    X = team("xy", {(0, 0), (0, 1)})
    assert eval_team(Structure(2), X, parse_formula(text)) is expected


def test_indep_example():
    assert not eval_team(Structure(2), team("xy", {(0, 0), (1, 1)}), parse_formula("indep(x ; y)"))


def test_sentence_truth_uses_empty_assignment_team():
    M = Structure(2, {"R": Relation(1, {(1,)})})
    phi = parse_formula("E x. (R(x) and const(x))")
    assert sentence_true(M, phi) == eval_team(M, EMPTY_ASSIGNMENT_TEAM, phi) is True
    assert not sentence_true(Structure(2, {"R": Relation(1)}), phi)


def test_empty_team_and_literals():
    M = Structure(2, {"R": Relation(1)})
    assert eval_team(M, Team(("x",)), parse_formula("R(x)"))
    assert check_flatness(M, Team(("x",)), parse_formula("R(x)"))
    assert not eval_team(M, Team(("x",)), parse_formula("ne(x)"))


def test_errors():
    M = Structure(2)
    with pytest.raises(TeamSemanticsError):
        check_flatness(M, team("x", {(0,)}), parse_formula("ne(x)"))
    with pytest.raises(Exception):
        eval_team(M, team("x", {(0,)}), parse_formula("dep(x ; z)"))
    with pytest.raises(Exception):
        eval_team(M, team("x", {(0,)}), Atom("mystery", (("x",),)))


def test_existential_needs_set_valued_choice():
    # x must take both values on the single assignment: only a set-valued H works
    M = Structure(2)
    assert sentence_true(M, parse_formula("E x. all(x)"))
    assert not sentence_true(M, parse_formula("E x. (all(x) and const(x))"))


def test_closure_metadata_helpers():
    f = parse_formula("dep(x ; y) or (R(x) and const(y))")
    assert known_closure(f, REG).down and not known_closure(f, REG).union
    g = parse_formula("inc(x ; y) or anon(x ; y)")
    assert known_closure(g, REG).union and not known_closure(g, REG).down
    assert not known_closure(parse_formula("inc(x ; y) gor inc(x ; y)"), REG).union
    assert singleton_witnessed(parse_formula("ne(x) and R(x)"), REG)
    assert not singleton_witnessed(parse_formula("inc(x ; y)"), REG)
    assert forces_constant(parse_formula("R(y) and const(x)"), "x")
    assert forces_constant(parse_formula("dep( ; x)"), "x")
    assert not forces_constant(parse_formula("E x. const(x)"), "x")


# ---------------------------------------------------------------------------
# differential tests


def _random_structure(rng, n):
    return Structure(n, {"R": Relation(2, {t for t in itertools.product(range(n), repeat=2) if rng.random() < 0.4})})


def test_pruned_naive_and_oracle_agree():
    rng = oracles.seeded(3)
    start = time.perf_counter()
    count = 0
    for _ in range(2000):
        n = rng.randrange(1, 3)
        M = _random_structure(rng, n)
        rels = {"R": set(M.relations["R"].tuples)}
        phi = oracles.random_with_atoms(rng, ("x", "y"), rng.randrange(4), ATOMS, gor=True)
        pruned, naive = TeamEvaluator(M), TeamEvaluator(M, prune=False)
        for X in enumerate_teams(n, ("x", "y")):
            expected = oracles.naive_team(n, rels, {}, oracles.team_as_sets(X), phi, oracles.atom_member)
            assert pruned.holds(X, phi) == naive.holds(X, phi) == expected, (phi, X)
            count += 1
    assert count > 1000
    assert time.perf_counter() - start < 120


def test_pruning_on_larger_teams():
    # three variables at n = 2 exercises rebinding and the cover rules on 8-slot teams
    rng = oracles.seeded(5)
    for _ in range(150):
        M = _random_structure(rng, 2)
        phi = oracles.random_with_atoms(rng, ("x", "y", "z"), rng.randrange(4), ATOMS, gor=True)
        pruned, naive = TeamEvaluator(M), TeamEvaluator(M, prune=False)
        for _ in range(6):
            X = team("xyz", {r for r in itertools.product(range(2), repeat=3) if rng.random() < 0.5})
            assert pruned.holds(X, phi) == naive.holds(X, phi), (phi, X)


def test_family_engine_matches_pointwise_evaluation():
    rng = oracles.seeded(9)
    for _ in range(150):
        n = rng.randrange(1, 4)
        M = _random_structure(rng, n)
        phi = oracles.random_with_atoms(rng, ("x", "y"), rng.randrange(4), ATOMS, gor=True)
        fam = team_family(M, ("x", "y"), phi)
        ev = TeamEvaluator(M)
        assert fam.dtype == np.bool_ and fam.shape == (1 << n * n,)
        for mask in rng.sample(range(1 << n * n), min(40, 1 << n * n)):
            assert bool(fam[mask]) == ev.holds(Team.from_mask(n, ("x", "y"), mask), phi), (phi, mask)


def test_family_respects_cap():
    with pytest.raises(Exception):
        FamilyEvaluator(Structure(3)).family(("x", "y", "z"), parse_formula("x = y"))


# ---------------------------------------------------------------------------
# closure invariants, checked over whole families


def _down_closed(fam, slots):
    return all(fam[m ^ (1 << i)] for m in np.flatnonzero(fam) for i in range(slots) if m >> i & 1)


def _union_closed(fam):
    members = np.flatnonzero(fam)
    return all(fam[a | b] for a in members for b in members)


@pytest.mark.parametrize("atoms,prop", [
    ((("dep", (1, 1)), ("exc", (1, 1)), ("const", (1,))), "down"),
    ((("inc", (1, 1)), ("anon", (1, 1))), "union"),
])
def test_closure_preserved(atoms, prop):
    rng = oracles.seeded(17)
    for _ in range(60):
        n = rng.randrange(1, 3)
        M = _random_structure(rng, n)
        phi = oracles.random_with_atoms(rng, ("x", "y"), rng.randrange(4), atoms)
        fam = team_family(M, ("x", "y"), phi)
        assert fam[0]
        assert (_down_closed if prop == "down" else lambda f, s: _union_closed(f))(fam, n * n), phi


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 9 - 1), st.integers(0, 2 ** 9 - 1), st.integers(0, 10 ** 6))
def test_flatness_property(rmask, xmask, seed):
    rng = oracles.seeded(seed)
    M = Structure(3, {"R": Relation.from_mask(3, 2, rmask)})
    X = Team.from_mask(3, ("x", "y"), xmask)
    phi = oracles.random_fo(rng, ("x", "y"), rng.randrange(4))
    assert check_flatness(M, X, phi)


def test_rebinding_existential():
    M = Structure(2)
    X = team("x", {(0,), (1,)})
    # rebinding x collapses the classes; const on the new x is satisfiable
    assert eval_team(M, X, Exists("x", Atom("const", (("x",),))))
    assert Var("x") == Var("x")


def test_family_handles_wide_atoms():
    # a 4-ary projection over 3 elements has 81 positions but at most 9 occur in a team
    M = Structure(3)
    phi = parse_formula("inc(x, y ; y, x) and dep(x, y ; y)")
    fam = team_family(M, ("x", "y"), phi)
    ev = TeamEvaluator(M)
    for mask in range(0, 512, 3):
        assert bool(fam[mask]) == ev.holds(Team.from_mask(3, ("x", "y"), mask), phi)
