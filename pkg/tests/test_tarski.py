import itertools

import pytest

import oracles
from teamlab.atoms import Registry, builtin_spec
from teamlab.model import Relation, Structure, enumerate_relations
from teamlab.syntax import BUILTIN_TAGS, parse_formula
from teamlab.tarski import EvaluationError, dep_membership, eval_tarski, membership_by_sentence

EDGE = Structure(3, {"R": Relation(2, {(0, 1), (1, 2)})}, {"a": 0})


@pytest.mark.parametrize("text,s,expected", [
    ("R(x, y)", {"x": 0, "y": 1}, True),
    ("R(y, x)", {"x": 0, "y": 1}, False),
    ("E y. R(x, y)", {"x": 2}, False),
    ("A x. (x = a or E y. R(y, x))", {}, True),
    ("E x. E y. (x != y and !R(x, y) and !R(y, x))", {}, True),
    ("R(a, x) and x != a", {"x": 1}, True),
])
def test_examples(text, s, expected):
    assert eval_tarski(EDGE, s, parse_formula(text, constants=("a",))) is expected


def test_errors():
    with pytest.raises(EvaluationError):
        eval_tarski(EDGE, {}, parse_formula("R(x, x)"))
    with pytest.raises(EvaluationError):
        eval_tarski(EDGE, {"x": 0}, parse_formula("S(x)"))
    with pytest.raises(EvaluationError):
        eval_tarski(EDGE, {"x": 0}, parse_formula("dep(x ; x)"))
    with pytest.raises(EvaluationError):
        eval_tarski(EDGE, {"x": 0}, parse_formula("R(x)"))


def test_agrees_with_satisfaction_sets():
    rng = oracles.seeded(11)
    order = ("x", "y", "z")
    checked = 0
    while checked < 10_000:
        n = rng.randrange(1, 4)
        rels = {"R": {t for t in itertools.product(range(n), repeat=2) if rng.random() < 0.4},
                "P": {t for t in itertools.product(range(n), repeat=1) if rng.random() < 0.5}}
        consts = {"a": rng.randrange(n)}
        M = Structure(n, {"R": Relation(2, rels["R"]), "P": Relation(1, rels["P"])}, consts)
        f = oracles.random_fo(rng, order, rng.randrange(5), rels=(("R", 2), ("P", 1)), consts=("a",))
        sat = oracles.sat_set(n, rels, consts, f, order)
        for a in rng.sample(list(itertools.product(range(n), repeat=3)), min(5, n ** 3)):
            s = dict(zip(order, a))
            assert eval_tarski(M, s, f) == (a in sat)
            checked += 1


@pytest.mark.parametrize("tag", BUILTIN_TAGS)
@pytest.mark.parametrize("n", [1, 2, 3])
def test_builtin_membership_matches_defining_sentence(tag, n):
    splits = {"ne": [(0,), (1,), (2,)], "const": [(0,), (1,), (2,)], "all": [(0,), (1,), (2,)],
              "inc": [(1, 1)], "exc": [(1, 1)]}.get(tag, [(1, 1), (0, 1), (1, 0), (0, 2)])
    for split in splits:
        spec = builtin_spec(tag, split)
        if n ** spec.arity > 9:
            continue
        for R in enumerate_relations(n, spec.arity):
            expected = oracles.atom_member(tag, tuple(range(k) for k in split), n, set(R.tuples))
            assert dep_membership(spec, n, R) == expected, (split, R)
            assert membership_by_sentence(spec, n, R) == expected, (split, R)


def test_ne_matches_registered_sentence():
    reg = Registry()
    nonempty = reg.register("nonempty", 1, "E x. R(x)")
    ne = builtin_spec("ne", (1,))
    for n in (1, 2, 3):
        for R in enumerate_relations(n, 1):
            assert dep_membership(nonempty, n, R) == dep_membership(ne, n, R) == bool(R.tuples)


def test_membership_accepts_structure_or_size():
    spec = builtin_spec("all", (1,))
    R = Relation(1, {(0,), (1,)})
    assert dep_membership(spec, Structure(2), R) and not dep_membership(spec, 3, R)
    with pytest.raises(EvaluationError):
        dep_membership(spec, 2, Relation(2))
