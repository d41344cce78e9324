import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from teamlab.model import (
    EMPTY_ASSIGNMENT_TEAM,
    ModelError,
    Relation,
    ResourceLimitError,
    Structure,
    Team,
    all_tuples,
    bits,
    enumerate_relations,
    enumerate_structures,
    enumerate_teams,
    extend_choice,
    extend_universal,
    relabel,
    submasks,
    team_projection,
    tuple_index,
)

M3 = Structure(3)


def test_projection_example():
    X = Team(("x", "y"), {(0, 1), (1, 1), (2, 0)})
    assert team_projection(X, ["y"]).tuples == {(1,), (0,)}
    assert team_projection(X, ["y", "x", "y"]).tuples == {(1, 0, 1), (1, 1, 1), (0, 2, 0)}
    with pytest.raises(ModelError):
        team_projection(X, ["z"])


def test_projection_of_empty_assignment_team():
    assert team_projection(EMPTY_ASSIGNMENT_TEAM, []).tuples == {()}
    assert team_projection(Team(()), []).tuples == frozenset()


def test_universal_extension_example():
    X = Team(("x",), {(0,), (2,)})
    Y = extend_universal(X, "y", M3)
    assert Y.vars == ("x", "y") and len(Y) == 6
    # rebinding overwrites in place
    Z = extend_universal(Team(("x", "y"), {(0, 0)}), "x", M3)
    assert Z.rows == {(0, 0), (1, 0), (2, 0)}


def test_choice_extension_example():
    X = Team(("x",), {(0,), (1,)})
    Y = extend_choice(X, "y", {(0,): {1, 2}, (1,): {0}})
    assert Y.rows == {(0, 1), (0, 2), (1, 0)}
    assert extend_choice(X, "y", lambda s: {s["x"]}).rows == {(0, 0), (1, 1)}
    with pytest.raises(ModelError):
        extend_choice(X, "y", {(0,): {1}, (1,): set()})
    with pytest.raises(ModelError):
        extend_choice(X, "y", {(0,): {1}})


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (1, 0), (2, 3)])
def test_enumerator_counts(n, k):
    rels = list(enumerate_relations(n, k))
    assert len(rels) == 2 ** (n ** k)
    assert len(set(rels)) == len(rels)
    assert len(list(enumerate_teams(n, ["x", "y", "z"][:k]))) == 2 ** (n ** k)


def test_enumerators_respect_cap():
    with pytest.raises(ResourceLimitError):
        list(enumerate_relations(3, 3))
    with pytest.raises(ValueError):
        list(enumerate_teams(0, ["x"]))


def test_structure_counts():
    assert sum(1 for _ in enumerate_structures(2, {"R": 2})) == 16
    assert sum(1 for _ in enumerate_structures(2, {"P": 1, "R": 2})) == 64


def test_structure_validation():
    with pytest.raises(ModelError):
        Structure(2, {"R": Relation(1, {(2,)})})
    with pytest.raises(ModelError):
        Structure(2, constants={"a": 5})
    with pytest.raises(ModelError):
        Structure(2, {"P": Relation(2)}, pred="P")


def test_team_validation():
    with pytest.raises(ModelError):
        Team(("x", "x"))
    with pytest.raises(ModelError):
        Team(("x",), {(0, 1)})
    assert str(EMPTY_ASSIGNMENT_TEAM) == "{eps}"
    assert str(Team(("x",))) == "{}"


def test_relabel():
    r = Relation(2, {(3, 7), (7, 7)})
    assert relabel(r, {3, 7}).tuples == {(0, 1), (1, 1)}


@given(st.integers(1, 3), st.integers(0, 3))
def test_tuple_index_matches_enumeration_order(n, k):
    for i, t in enumerate(all_tuples(n, k)):
        assert tuple_index(t, n) == i


@given(st.integers(0, 2 ** 12 - 1))
def test_submasks_are_exactly_the_subsets(mask):
    subs = list(submasks(mask))
    assert len(subs) == 2 ** bin(mask).count("1") == len(set(subs))
    assert all(s & ~mask == 0 for s in subs)
    assert subs == sorted(subs)
    assert sum(1 << b for b in bits(mask)) == mask


@settings(max_examples=200)
@given(st.integers(1, 3), st.integers(0, 2 ** 9 - 1))
def test_mask_round_trip(n, raw):
    mask = raw & ((1 << n * n) - 1)
    assert Team.from_mask(n, ("x", "y"), mask).mask(n) == mask
    assert Relation.from_mask(n, 2, mask).mask(n) == mask


@settings(max_examples=200)
@given(st.integers(1, 3), st.integers(0, 2 ** 9 - 1), st.integers(0, 10 ** 6))
def test_extension_invariants(n, raw, seed):
    X = Team.from_mask(n, ("x", "y"), raw & ((1 << n * n) - 1))
    M = Structure(n)
    U = extend_universal(X, "z", M)
    assert len(U) == len(X) * n
    assert team_projection(U, ["x", "y"]) == team_projection(X, ["x", "y"])
    rng = random.Random(seed)
    H = {r: set(rng.sample(range(n), rng.randrange(1, n + 1))) for r in X.rows}
    C = extend_choice(X, "z", H)
    # every choice extension sits inside the universal one and restricts back to X
    assert C.rows <= U.rows
    assert team_projection(C, ["x", "y"]) == team_projection(X, ["x", "y"])
    assert len(C) == sum(len(h) for h in H.values())


def test_union_of_teams():
    a, b = Team(("x",), {(0,)}), Team(("x",), {(1,)})
    assert (a | b).rows == {(0,), (1,)} and a <= a | b
    with pytest.raises(ModelError):
        a | Team(("y",))


def test_from_assignments():
    X = Team.from_assignments([{"x": 0, "y": 1}, {"y": 2, "x": 1}])
    assert X.vars == ("x", "y") and X.rows == {(0, 1), (1, 2)}
    assert list(itertools.islice(X, 1)) == [{"x": 0, "y": 1}]
