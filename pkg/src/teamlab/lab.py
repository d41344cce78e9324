"""Closure-property probes, maximality and non-jumping checks, EF games, step search.

Every probe sweeps the domain sizes ``1..nmax`` and stops at the first
counterexample in enumeration order (domain size first, then relation
bitmask).  When ``n**k`` exceeds the cap, relations are sampled from a seeded
generator instead and the verdict says so.  Counterexamples are re-checked
against the defining sentence before they are reported.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .atoms import TABLE1, TABLE1_ORDER, builtin_spec
from .model import DEFAULT_CAP, Relation, ResourceLimitError, Structure, all_tuples, bits, fld, relabel, submasks
from .syntax import CLOSURE_PROPERTIES, DependencySpec
from .tarski import dep_membership, membership_by_sentence

DEFAULT_SAMPLES = 2000
DEFAULT_SEED = 0

UNION_NOTE = ("union closure checked as: the empty relation is a member (empty family) "
              "and members are closed under binary unions; finite families follow by induction, "
              "infinite families are not testable")
DOMIND_NOTE = "the empty relation is skipped: its field is the empty domain"


@dataclass
class Verdict:
    prop: str
    dependency: str
    result: str  # "holds" or "counterexample"
    nmax: int
    counterexample: dict | None = None
    verified: bool | None = None
    sampled: bool = False
    seed: int | None = None
    notes: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.result == "holds"

    @property
    def flag(self) -> str:
        return "+" if self.holds else "-"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StepWitness:
    n1: int
    n2: int
    R1: Relation
    R2: Relation
    S1: Relation
    rank: int

    def to_dict(self) -> dict:
        return {
            "n1": self.n1, "n2": self.n2, "rank": self.rank,
            "R1": rel_json(self.R1), "R2": rel_json(self.R2), "S1": rel_json(self.S1),
        }


def rel_json(r: Relation) -> list:
    return [list(t) for t in r]


# ---------------------------------------------------------------------------
# membership tables


def membership_table(spec: DependencySpec, n: int) -> np.ndarray:
    """Boolean array over all relation bitmasks for domain size ``n``."""
    return _table(spec, n)


@lru_cache(maxsize=256)
def _table(spec, n):
    slots = n ** spec.arity
    return np.array([dep_membership(spec, n, Relation.from_mask(n, spec.arity, m)) for m in range(1 << slots)],
                    dtype=bool)


def _member(spec, n, mask, table=None) -> bool:
    if table is not None:
        return bool(table[mask])
    return dep_membership(spec, n, Relation.from_mask(n, spec.arity, mask))


def _masks(spec, n, cap, rng, samples):
    """Relation masks to sweep at size ``n``: all of them, or a seeded sample."""
    slots = n ** spec.arity
    if slots <= cap:
        return range(1 << slots), membership_table(spec, n), False
    return [rng.getrandbits(slots) for _ in range(samples)], None, True


def _cex(n, **rels) -> dict:
    out = {"n": n}
    for name, r in rels.items():
        out[name] = rel_json(r) if isinstance(r, Relation) else r
    return out


# ---------------------------------------------------------------------------
# per-size probe bodies (top level so that worker processes can run them)


def _probe_empty(spec, n, cap, seed, samples):
    if not dep_membership(spec, n, Relation(spec.arity)):
        return _cex(n, R=Relation(spec.arity)), False
    return None, False


def _probe_down(spec, n, cap, seed, samples):
    rng = random.Random(seed * 1000 + n)
    masks, table, sampled = _masks(spec, n, cap, rng, samples)
    k = spec.arity
    # a failure anywhere below R shows up as a failure at a single-tuple removal on the way down
    for r in masks:
        if not _member(spec, n, r, table):
            continue
        for b in bits(r):
            s = r & ~(1 << b)
            if not _member(spec, n, s, table):
                return _cex(n, R=Relation.from_mask(n, k, r), S=Relation.from_mask(n, k, s)), sampled
    return None, sampled


def _probe_up(spec, n, cap, seed, samples):
    rng = random.Random(seed * 1000 + n)
    masks, table, sampled = _masks(spec, n, cap, rng, samples)
    k = spec.arity
    full = (1 << n ** k) - 1
    for r in masks:
        if not _member(spec, n, r, table):
            continue
        for b in bits(full & ~r):
            s = r | (1 << b)
            if not _member(spec, n, s, table):
                return _cex(n, R=Relation.from_mask(n, k, r), S=Relation.from_mask(n, k, s)), sampled
    return None, sampled


def _probe_union(spec, n, cap, seed, samples):
    k = spec.arity
    if not dep_membership(spec, n, Relation(k)):
        return _cex(n, family=[], union=Relation(k)), False
    slots = n ** k
    if slots <= cap:
        table = membership_table(spec, n)
        members = np.flatnonzero(table)
        for i, r1 in enumerate(members):
            unions = members[i:] | r1
            bad = np.flatnonzero(~table[unions])
            if bad.size:
                r2 = int(members[i + bad[0]])
                return _cex(n, R1=Relation.from_mask(n, k, int(r1)), R2=Relation.from_mask(n, k, r2),
                            union=Relation.from_mask(n, k, int(r1) | r2)), False
        return None, False
    rng = random.Random(seed * 1000 + n)
    found = [m for m in (rng.getrandbits(slots) for _ in range(samples)) if _member(spec, n, m)]
    for r1 in found:
        for r2 in found:
            if not _member(spec, n, r1 | r2):
                return _cex(n, R1=Relation.from_mask(n, k, r1), R2=Relation.from_mask(n, k, r2),
                            union=Relation.from_mask(n, k, r1 | r2)), True
    return None, True


def _probe_domind(spec, n, cap, seed, samples):
    rng = random.Random(seed * 1000 + n)
    masks, table, sampled = _masks(spec, n, cap, rng, samples)
    k = spec.arity
    for r in masks:
        if not r:
            continue
        rel = Relation.from_mask(n, k, r)
        field_ = fld(rel)
        over_a = _member(spec, n, r, table)
        over_fld = dep_membership(spec, len(field_), relabel(rel, field_))
        if over_a != over_fld:
            return _cex(n, R=rel, fld=sorted(field_), member_over_domain=over_a, member_over_fld=over_fld), sampled
    return None, sampled


PROBES = {
    "empty": _probe_empty,
    "down": _probe_down,
    "union": _probe_union,
    "up": _probe_up,
    "domind": _probe_domind,
}


# ---------------------------------------------------------------------------
# re-verification through the defining sentence


def _rel(n, spec, rows) -> Relation:
    return Relation(spec.arity, frozenset(tuple(t) for t in rows))


def verify_counterexample(spec: DependencySpec, prop: str, cex: dict) -> bool:
    """Re-check a counterexample payload using only the defining sentence."""
    n = cex["n"]
    m = lambda size, rows: membership_by_sentence(spec, size, _rel(size, spec, rows))
    if prop == "empty":
        return not cex["R"] and not m(n, [])
    if prop in ("down", "up"):
        r, s = set(map(tuple, cex["R"])), set(map(tuple, cex["S"]))
        nested = s <= r if prop == "down" else r <= s
        return nested and m(n, r) and not m(n, s)
    if prop == "union":
        if "family" in cex:
            return not cex["union"] and not m(n, [])
        r1, r2 = set(map(tuple, cex["R1"])), set(map(tuple, cex["R2"]))
        return m(n, r1) and m(n, r2) and not m(n, r1 | r2) and set(map(tuple, cex["union"])) == r1 | r2
    if prop == "domind":
        rel = _rel(n, spec, cex["R"])
        field_ = fld(rel)
        if sorted(field_) != cex["fld"]:
            return False
        return m(n, rel.tuples) != membership_by_sentence(spec, len(field_), relabel(rel, field_))
    raise ValueError(f"unknown property {prop!r}")


# ---------------------------------------------------------------------------
# probes


def probe(spec: DependencySpec, prop: str, nmax: int, cap: int = DEFAULT_CAP, seed: int = DEFAULT_SEED,
          samples: int = DEFAULT_SAMPLES, jobs: int = 1) -> Verdict:
    """Run one closure probe over domain sizes ``1..nmax``."""
    body = PROBES[prop]
    sizes = list(range(1, nmax + 1))
    if jobs > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(body, [spec] * len(sizes), sizes, [cap] * len(sizes),
                                    [seed] * len(sizes), [samples] * len(sizes)))
    else:
        results = []
        for n in sizes:
            results.append(body(spec, n, cap, seed, samples))
            if results[-1][0] is not None:
                break
    sampled = any(s for _, s in results)
    notes = []
    if prop == "union":
        notes.append(UNION_NOTE)
    if prop == "domind":
        notes.append(DOMIND_NOTE)
    v = Verdict(prop, spec.label(), "holds", nmax, sampled=sampled, seed=seed if sampled else None, notes=notes)
    for cex, _ in results:
        if cex is not None:
            v.result = "counterexample"
            v.counterexample = cex
            v.verified = verify_counterexample(spec, prop, cex)
            break
    return v


def probe_empty_team(spec, nmax, **kw) -> Verdict:
    return probe(spec, "empty", nmax, **kw)


def probe_downwards(spec, nmax, **kw) -> Verdict:
    return probe(spec, "down", nmax, **kw)


def probe_union(spec, nmax, **kw) -> Verdict:
    return probe(spec, "union", nmax, **kw)


def probe_upwards(spec, nmax, **kw) -> Verdict:
    return probe(spec, "up", nmax, **kw)


def probe_domain_independence(spec, nmax, **kw) -> Verdict:
    return probe(spec, "domind", nmax, **kw)


def reproduce_table1(nmax: int = 3, **kw) -> dict:
    """All five probes on every row of the closure table, diffed against the stored rows."""
    rows = {}
    for tag in TABLE1_ORDER:
        spec = builtin_spec(tag)
        verdicts = {p: probe(spec, p, nmax, **kw) for p in CLOSURE_PROPERTIES}
        observed = "".join(verdicts[p].flag for p in CLOSURE_PROPERTIES)
        rows[tag] = {
            "dependency": spec.label(),
            "expected": TABLE1[tag],
            "observed": observed,
            "match": observed == TABLE1[tag],
            "verdicts": {p: v.to_dict() for p, v in verdicts.items()},
        }
    return {"nmax": nmax, "rows": rows, "all_match": all(r["match"] for r in rows.values())}


# ---------------------------------------------------------------------------
# maximal members and non-jumping


def _size(M) -> int:
    return M.n if isinstance(M, Structure) else int(M)


def dmax_membership(spec: DependencySpec, M, R: Relation, cap: int = DEFAULT_CAP) -> bool:
    """``R`` is a member with no proper superset member over the same domain."""
    n = _size(M)
    slots = n ** spec.arity
    if slots > cap:
        raise ResourceLimitError(f"{slots} tuple positions exceeds the cap of {cap}")
    table = membership_table(spec, n)
    r = R.mask(n)
    if not table[r]:
        return False
    free = ((1 << slots) - 1) & ~r
    return not any(table[r | extra] for extra in submasks(free) if extra)


def _nonjumping_size(spec, n, cap):
    slots = n ** spec.arity
    if slots > cap:
        raise ResourceLimitError(f"{slots} tuple positions exceeds the cap of {cap}")
    table = membership_table(spec, n)
    full = (1 << slots) - 1
    maximal = {}
    for r in np.flatnonzero(table):
        r = int(r)
        free = full & ~r
        maximal[r] = not any(table[r | e] for e in submasks(free) if e)
    for r in sorted(maximal):
        free = full & ~r
        reached = False
        for extra in submasks(free):
            top = r | extra
            if maximal.get(top) and all(table[r | mid] for mid in submasks(extra)):
                reached = True
                break
        if not reached:
            return _cex(n, R=Relation.from_mask(n, spec.arity, r))
    return None


def nonjumping_probe(spec: DependencySpec, nmax: int, cap: int = DEFAULT_CAP) -> Verdict:
    """Every member reaches a maximal member through an interval of members."""
    for n in range(1, nmax + 1):
        cex = _nonjumping_size(spec, n, cap)
        if cex is not None:
            rel = _rel(n, spec, cex["R"])
            ok = membership_by_sentence(spec, n, rel)
            return Verdict("nonjumping", spec.label(), "counterexample", nmax, cex, verified=ok)
    return Verdict("nonjumping", spec.label(), "holds", nmax)


# ---------------------------------------------------------------------------
# Ehrenfeucht-Fraisse games


def _signature(M: Structure) -> tuple:
    return tuple(sorted((name, r.arity) for name, r in M.relations.items())), tuple(sorted(M.constants))


def _partial_iso(M1, M2, a: tuple, b: tuple) -> bool:
    p = len(a)
    for i in range(p):
        for j in range(i, p):
            if (a[i] == a[j]) != (b[i] == b[j]):
                return False
    for name, r1 in M1.relations.items():
        r2 = M2.relations[name]
        for idx in all_tuples(p, r1.arity):
            if (tuple(a[i] for i in idx) in r1.tuples) != (tuple(b[i] for i in idx) in r2.tuples):
                return False
    return True


def ef_equiv(M1: Structure, M2: Structure, k: int) -> bool:
    """Duplicator wins the ``k``-round EF game; constants are pebbled from the start."""
    if _signature(M1) != _signature(M2):
        raise ValueError("structures have different signatures")
    names = sorted(M1.constants)
    a0 = tuple(M1.constants[c] for c in names)
    b0 = tuple(M2.constants[c] for c in names)
    memo = {}

    def win(a, b, rounds):
        pairs = tuple(sorted(set(zip(a, b))))
        key = (pairs, rounds)
        if key in memo:
            return memo[key]
        a, b = tuple(p for p, _ in pairs), tuple(q for _, q in pairs)
        out = _partial_iso(M1, M2, a, b)
        if out and rounds:
            out = all(any(win(a + (x,), b + (y,), rounds - 1) for y in M2.domain) for x in M1.domain) and \
                all(any(win(a + (x,), b + (y,), rounds - 1) for x in M1.domain) for y in M2.domain)
        memo[key] = out
        return out

    return win(a0, b0, k)


def _atomic_type(M: Structure, a: tuple) -> tuple:
    eqs = tuple(a[i] == a[j] for i in range(len(a)) for j in range(len(a)))
    rels = tuple(
        (name, tuple(tuple(a[i] for i in idx) in M.relations[name].tuples for idx in all_tuples(len(a), r.arity)))
        for name, r in sorted(M.relations.items()))
    return eqs, rels


def rank_type(M: Structure, a: tuple, k: int):
    """Rank-``k`` type of the tuple ``a``: its atomic type plus the types of its one-step extensions."""
    if k == 0:
        return _atomic_type(M, a)
    return _atomic_type(M, a), frozenset(rank_type(M, a + (x,), k - 1) for x in M.domain)


def type_equiv(M1: Structure, M2: Structure, k: int) -> bool:
    """Rank-``k`` equivalence through types; a second engine next to :func:`ef_equiv`."""
    names = sorted(M1.constants)
    if names != sorted(M2.constants):
        raise ValueError("structures have different signatures")
    a = tuple(M1.constants[c] for c in names)
    b = tuple(M2.constants[c] for c in names)
    return rank_type(M1, a, k) == rank_type(M2, b, k)


# ---------------------------------------------------------------------------
# forbidden-step search


STEP_CAVEAT = ("finite elementary substructures are trivial, so the search uses an induced substructure "
               "together with rank-k EF equivalence; witnesses are heuristic evidence only, and an empty "
               "result is not evidence that the dependency is strongly first order")


def _restriction_mask(n1, n2, k) -> int:
    """Bitmask (over ``n2**k`` positions) of the tuples lying inside ``0..n1-1``."""
    out = 0
    for i, t in enumerate(all_tuples(n2, k)):
        if max(t, default=0) < n1:
            out |= 1 << i
    return out


def _shrink(mask2, n1, n2, k) -> int:
    """Re-index a mask over ``0..n2-1`` that lives inside ``0..n1-1`` onto ``n1**k`` positions."""
    out = 0
    tuples = all_tuples(n2, k)
    for i in bits(mask2):
        j = 0
        for a in tuples[i]:
            j = j * n1 + a
        out |= 1 << j
    return out


def _step_pairs(spec, n1, n2, rank, cap, rng, samples):
    k = spec.arity
    masks, table2, _ = _masks(spec, n2, cap, rng, samples)
    inner = _restriction_mask(n1, n2, k)
    table1 = membership_table(spec, n1) if n1 ** k <= cap else None
    out = []
    for r2 in masks:
        if not _member(spec, n2, r2, table2):
            continue
        r1_big = r2 & inner
        r1 = _shrink(r1_big, n1, n2, k)
        if not _member(spec, n1, r1, table1):
            continue
        gap = None
        for extra in submasks(r2 & ~r1_big):
            if not _member(spec, n2, r1_big | extra, table2):
                gap = r1_big | extra
                break
        if gap is None:
            continue
        R1 = Relation.from_mask(n1, k, r1)
        R2 = Relation.from_mask(n2, k, r2)
        if ef_equiv(Structure(n1, {spec.symbol: R1}), Structure(n2, {spec.symbol: R2}), rank):
            out.append(StepWitness(n1, n2, R1, R2, Relation.from_mask(n2, k, gap), rank))
    return out


def _step_size(spec, n2, rank, cap, seed, samples):
    rng = random.Random(seed * 1000 + n2)
    out = []
    for n1 in range(1, n2):
        out.extend(_step_pairs(spec, n1, n2, rank, cap, rng, samples))
    return out


def step_search(spec: DependencySpec, nmax: int, rank: int, cap: int = DEFAULT_CAP, seed: int = DEFAULT_SEED,
                samples: int = DEFAULT_SAMPLES, jobs: int = 1) -> list:
    """Witnesses ``(A1,R1) <= (A2,R2)`` in ``D`` with a non-member sandwiched between ``R1`` and ``R2``."""
    sizes = list(range(2, nmax + 1))
    if jobs > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_step_size, [spec] * len(sizes), sizes, [rank] * len(sizes), [cap] * len(sizes),
                                  [seed] * len(sizes), [samples] * len(sizes)))
    else:
        parts = [_step_size(spec, n2, rank, cap, seed, samples) for n2 in sizes]
    return [w for part in parts for w in part]


def verify_step_witness(spec: DependencySpec, w: StepWitness) -> dict:
    """Re-check the six witness conditions through the defining sentence and a fresh game."""
    k = spec.arity
    inside = {t for t in w.R2.tuples if all(a < w.n1 for a in t)}
    m = lambda n, r: membership_by_sentence(spec, n, r)
    checks = {
        "restriction": w.R1.tuples == frozenset(inside) and w.n1 < w.n2 and w.R1.arity == k,
        "sandwich": w.R1.tuples <= w.S1.tuples <= w.R2.tuples,
        "small_member": m(w.n1, w.R1),
        "large_member": m(w.n2, w.R2),
        "gap_nonmember": not m(w.n2, w.S1),
        "equivalent": type_equiv(Structure(w.n1, {spec.symbol: w.R1}), Structure(w.n2, {spec.symbol: w.R2}), w.rank),
    }
    return checks
