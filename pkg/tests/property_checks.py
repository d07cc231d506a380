"""Randomized property checks for the constraint engine.

Each check compares an engine operation against an independent exact
oracle (one-variable interval arithmetic, or direct point evaluation),
so a failure always means a real disagreement. The module is plain
Python on a seeded random.Random: the hypothesis wrappers in
test_constraints_properties.py reuse the same predicates, and the
acceptance suite times a large seeded batch.
"""

from __future__ import annotations

import random
from fractions import Fraction

from ptasynth.constraints import (
    Atom,
    ConstraintSet,
    Context,
    ConvexPolyhedron,
    Rel,
    set_equal,
)

CTX = Context(clocks=("x", "y"), params=("p",))
ARITY = CTX.arity


def random_atom(rng: random.Random) -> Atom:
    while True:
        coeffs = tuple(rng.randint(-3, 3) for _ in range(ARITY))
        if any(coeffs):
            break
    rel = rng.choice([Rel.EQ, Rel.LE, Rel.LE, Rel.LT])
    const = rng.randint(-4, 8)
    return Atom(coeffs, rel, const)


def random_poly(rng: random.Random, max_atoms: int = 4) -> ConvexPolyhedron:
    atoms = [random_atom(rng) for _ in range(rng.randint(0, max_atoms))]
    return ConvexPolyhedron(CTX, atoms)


def random_set(rng: random.Random, max_pieces: int = 3) -> ConstraintSet:
    pieces = [random_poly(rng) for _ in range(rng.randint(0, max_pieces))]
    return ConstraintSet(CTX, pieces)


def random_point(rng: random.Random) -> dict[str, Fraction]:
    denom = rng.choice([1, 2, 3, 4])
    return {v: Fraction(rng.randint(0, 5 * denom), denom) for v in CTX.vars}


def fiber_interval(atoms, j: int, values: dict[int, Fraction]):
    """Exact fiber of variable j at the given values of the others.

    Returns (nonempty, membership test) computed with one-variable
    interval arithmetic, independent of the elimination code.
    """
    lo = hi = None
    lo_strict = hi_strict = False
    pins = []
    feasible = True
    for a in atoms:
        aj = a.coeffs[j]
        rest = sum(Fraction(c) * values[i] for i, c in enumerate(a.coeffs) if i != j and c)
        if aj == 0:
            diff = Fraction(a.const) - rest
            ok = diff == 0 if a.rel == Rel.EQ else diff >= 0 if a.rel == Rel.LE else diff > 0
            if not ok:
                feasible = False
        else:
            bound = (Fraction(a.const) - rest) / aj
            if a.rel == Rel.EQ:
                pins.append(bound)
            elif aj > 0:
                if hi is None or bound < hi or (bound == hi and a.rel == Rel.LT):
                    hi, hi_strict = bound, a.rel == Rel.LT
            else:
                if lo is None or bound > lo or (bound == lo and a.rel == Rel.LT):
                    lo, lo_strict = bound, a.rel == Rel.LT

    def member(v: Fraction) -> bool:
        if not feasible:
            return False
        if any(v != pin for pin in pins):
            return False
        if lo is not None and (v < lo or (v == lo and lo_strict)):
            return False
        if hi is not None and (v > hi or (v == hi and hi_strict)):
            return False
        return True

    if not feasible:
        return False, member
    if pins:
        return member(pins[0]), member
    if lo is None and hi is None:
        return True, member
    if lo is None:
        return True, member
    if hi is None:
        return True, member
    nonempty = lo < hi or (lo == hi and not lo_strict and not hi_strict)
    return nonempty, member


def check_eliminate_matches_fiber(rng: random.Random) -> None:
    """eliminate(v) holds at a point exactly when the fiber is nonempty."""
    p = random_poly(rng)
    if p.is_empty():
        return
    j = rng.randrange(ARITY)
    name = CTX.vars[j]
    out = p.eliminate([name])
    q = random_point(rng)
    values = {i: q[CTX.vars[i]] for i in range(ARITY) if i != j}
    nonempty, _ = fiber_interval(p.atoms, j, values)
    q_free = dict(q)
    q_free[name] = Fraction(0)
    assert out.satisfies(q_free) == nonempty, (p, name, q)


def check_elapse_matches_delay_fiber(rng: random.Random) -> None:
    """q is in elapse(P) exactly when some delay d >= 0 puts q - d in P."""
    p = random_poly(rng)
    if p.is_empty():
        return
    out = p.elapse()
    q = random_point(rng)
    point = [q[v] for v in CTX.vars]
    nclocks = len(CTX.clocks)
    shifted = []
    for a in p.atoms:
        d_coeff = -sum(a.coeffs[:nclocks])
        shifted.append(Atom(a.coeffs + (d_coeff,), a.rel, a.const))
    shifted.append(Atom((0,) * ARITY + (-1,), Rel.LE, 0))
    values = {i: point[i] for i in range(ARITY)}
    nonempty, _ = fiber_interval(shifted, ARITY, values)
    assert out.satisfies(q) == nonempty, (p, q)


def check_reset_matches_fiber(rng: random.Random) -> None:
    """q is in reset(P, c) exactly when q[c] = 0 and some old value fits."""
    p = random_poly(rng)
    if p.is_empty():
        return
    clock = rng.choice(CTX.clocks)
    j = CTX.index(clock)
    out = p.reset([clock])
    q = random_point(rng)
    if rng.random() < 0.6:
        q[clock] = Fraction(0)
    values = {i: q[CTX.vars[i]] for i in range(ARITY) if i != j}
    nonempty, _ = fiber_interval(p.atoms, j, values)
    expected = q[clock] == 0 and nonempty
    assert out.satisfies(q) == expected, (p, clock, q)


def check_negate_partitions_the_orthant(rng: random.Random) -> None:
    s = random_set(rng)
    comp = s.negate()
    for _ in range(3):
        q = random_point(rng)
        assert s.satisfies(q) != comp.satisfies(q), (s, q)


def check_intersection_is_pointwise_and(rng: random.Random) -> None:
    a = random_set(rng)
    b = random_set(rng)
    both = a.intersect(b)
    for _ in range(3):
        q = random_point(rng)
        assert both.satisfies(q) == (a.satisfies(q) and b.satisfies(q)), (a, b, q)


def check_union_is_pointwise_or(rng: random.Random) -> None:
    a = random_set(rng)
    b = random_set(rng)
    merged = a.union(b)
    for _ in range(3):
        q = random_point(rng)
        assert merged.satisfies(q) == (a.satisfies(q) or b.satisfies(q)), (a, b, q)


def check_includes_agrees_with_points(rng: random.Random) -> None:
    a = random_set(rng)
    b = random_set(rng)
    if a.includes(b):
        for _ in range(4):
            q = random_point(rng)
            if b.satisfies(q):
                assert a.satisfies(q), (a, b, q)
    narrowed = a.intersect(b)
    assert a.includes(narrowed) and b.includes(narrowed)


def check_canonical_form_is_order_independent(rng: random.Random) -> None:
    atoms = [random_atom(rng) for _ in range(rng.randint(1, 4))]
    base = ConvexPolyhedron(CTX, atoms)
    shuffled = atoms[:]
    rng.shuffle(shuffled)
    again = ConvexPolyhedron(CTX, shuffled)
    assert base.atoms == again.atoms, (atoms, shuffled)


def check_de_morgan(rng: random.Random) -> None:
    a = random_set(rng, max_pieces=2)
    b = random_set(rng, max_pieces=2)
    lhs = a.union(b).negate()
    rhs = a.negate().intersect(b.negate())
    assert set_equal(lhs, rhs), (a, b)


def check_any_point_is_a_member(rng: random.Random) -> None:
    p = random_poly(rng)
    q = p.any_point()
    if p.is_empty():
        assert q is None
    else:
        assert q is not None and p.satisfies(q), (p, q)


def check_projection_consistency(rng: random.Random) -> None:
    p = random_poly(rng)
    proj = p.project_params()
    flat = p.eliminate(CTX.clocks)
    for _ in range(3):
        q = random_point(rng)
        q_zeroed = dict(q)
        for c in CTX.clocks:
            q_zeroed[c] = Fraction(0)
        assert proj.satisfies({"p": q["p"]}) == flat.satisfies(q_zeroed), (p, q)
        if p.satisfies(q):
            assert proj.satisfies({"p": q["p"]}), (p, q)


ALL_CHECKS = [
    check_eliminate_matches_fiber,
    check_elapse_matches_delay_fiber,
    check_reset_matches_fiber,
    check_negate_partitions_the_orthant,
    check_intersection_is_pointwise_and,
    check_union_is_pointwise_or,
    check_includes_agrees_with_points,
    check_canonical_form_is_order_independent,
    check_de_morgan,
    check_any_point_is_a_member,
    check_projection_consistency,
]


def run_batch(instances: int, seed: int = 20260822) -> dict[str, int]:
    """Run the given number of randomized instances, round robin."""
    rng = random.Random(seed)
    counts: dict[str, int] = {}
    for k in range(instances):
        check = ALL_CHECKS[k % len(ALL_CHECKS)]
        check(rng)
        counts[check.__name__] = counts.get(check.__name__, 0) + 1
    return counts
