"""Unit tests for the exact constraint engine.

Expected values are worked out by hand (interval arithmetic and direct
Fourier-Motzkin on paper), never read off the implementation.
"""

from fractions import Fraction

import pytest

from ptasynth.constraints import (
    Atom,
    ConstraintSet,
    Context,
    ConvexPolyhedron,
    Rel,
    as_fraction,
    atom_text,
    parse_atoms,
    parse_valuation,
    set_equal,
)

CXY = Context(clocks=("x", "y"), params=())
CXYP = Context(clocks=("x", "y"), params=("p",))
CP = Context(clocks=(), params=("p",))
CPN = Context(clocks=(), params=("p", "n"))


def poly(ctx, text):
    return ConvexPolyhedron.of(ctx, text)


def cset(ctx, text):
    return ConstraintSet.of(ctx, text)


class TestCanonicalForm:
    def test_two_opposite_bounds_become_an_equality(self):
        p = poly(CXY, "x >= 1 && x <= 1")
        assert p == poly(CXY, "x = 1")
        assert "x = 1" in str(p)

    def test_entailed_equality_is_promoted(self):
        # x <= p, p <= y, y <= x forces x = y = p
        p = poly(CXYP, "x <= p && p <= y && y <= x")
        assert p.entails(parse_atoms(CXYP, "x = y")[0])
        assert p.entails(parse_atoms(CXYP, "x = p")[0])
        assert not p.is_empty()

    def test_redundant_bound_is_dropped(self):
        p = poly(CP, "p <= 1 && p <= 2")
        assert p == poly(CP, "p <= 1")

    def test_strict_beats_nonstrict_at_same_bound(self):
        p = poly(CP, "p < 1 && p <= 1")
        assert p == poly(CP, "p < 1")

    def test_canonical_form_ignores_atom_order(self):
        a = parse_atoms(CXYP, "x - y <= 2 && y < 3 && x >= 1 && p <= x")
        for perm in ([3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]):
            q = ConvexPolyhedron(CXYP, [a[i] for i in perm])
            assert q.atoms == ConvexPolyhedron(CXYP, a).atoms

    def test_contradiction_is_empty(self):
        assert poly(CP, "p < 1 && p > 1").is_empty()
        assert poly(CP, "p < 0").is_empty()  # domain is nonnegative
        assert poly(CXY, "false").is_empty()

    def test_universe_keeps_domain_atoms(self):
        assert str(ConvexPolyhedron.universe(CP)) == "p >= 0"
        assert str(ConvexPolyhedron.universe(CPN)) == "p >= 0 && n >= 0"


class TestElimination:
    def test_eliminate_middle_variable(self):
        # 0 <= p <= x and x <= 2 gives 0 <= p <= 2 after dropping x
        p = poly(CXYP, "0 <= p && p <= x && x <= 2")
        out = p.eliminate(["x"])
        expected = poly(CXYP, "0 <= p && p <= 2")
        assert out == expected

    def test_strictness_propagates(self):
        # p < x and x <= 2 gives p < 2
        p = poly(CXYP, "p < x && x <= 2")
        out = p.eliminate(["x"])
        assert out.entails(parse_atoms(CXYP, "p < 2")[0])
        assert not out.entails(parse_atoms(CXYP, "p < 2")[0].negations()[0])
        assert out == poly(CXYP, "p < 2")

    def test_equality_pivot(self):
        p = poly(CXYP, "x = 2 p && x <= 3")
        out = p.eliminate(["x"])
        assert out == poly(CXYP, "2 p <= 3")
        assert "p <= 3/2" in str(out)

    def test_projection_to_params(self):
        p = poly(CXYP, "y - x = p && x >= 0 && y < 3")
        proj = p.project_params()
        assert proj.ctx == CP
        assert proj == poly(CP, "p < 3")


class TestElapseAndReset:
    def test_elapse_from_origin(self):
        p = poly(CXY, "x = 0 && y = 0")
        assert str(p.elapse()) == "x - y = 0 && x >= 0"

    def test_elapse_keeps_differences(self):
        p = poly(CXYP, "x = 0 && y = p")
        out = p.elapse()
        assert out == poly(CXYP, "y - x = p && x >= 0")

    def test_elapse_is_idempotent_and_inflationary(self):
        p = poly(CXYP, "x <= 2 && y - x = p && y >= 1")
        once = p.elapse()
        assert once.includes(p)
        assert once.elapse() == once

    def test_elapse_ignores_parameters(self):
        # From x = 1 with y free, both clocks advance together, so the
        # difference bound x - y <= 1 appears while p is untouched.
        p = poly(CXYP, "p <= 2 && x = 1")
        out = p.elapse()
        assert out.entails(parse_atoms(CXYP, "p <= 2")[0])
        assert out == poly(CXYP, "p <= 2 && x >= 1 && x - y <= 1")

    def test_reset_single_clock(self):
        p = poly(CXY, "x - y = 0 && x >= 1")
        out = p.reset(["x"])
        assert out == poly(CXY, "x = 0 && y >= 1")

    def test_reset_forgets_old_value_exactly(self):
        # After resetting x, only the y bounds derived through x remain
        p = poly(CXYP, "x = p && y - x <= 2")
        out = p.reset(["x"])
        assert out == poly(CXYP, "x = 0 && y <= p + 2")


class TestSetAlgebra:
    def test_negate_interval(self):
        s = cset(CP, "p > 0 && p < 1")
        assert set_equal(s.negate(), cset(CP, "p = 0 || p >= 1"))

    def test_negate_roundtrip(self):
        s = cset(CP, "(p > 2 && p < 3) || p = 1")
        assert set_equal(s.negate().negate(), s)

    def test_negate_of_universe_is_empty(self):
        assert ConstraintSet.universe(CPN).negate().is_empty()
        assert set_equal(ConstraintSet.empty(CPN).negate(), ConstraintSet.universe(CPN))

    def test_union_and_intersection(self):
        a = cset(CP, "p < 2")
        b = cset(CP, "p > 1")
        both = a.intersect(b)
        assert set_equal(both, cset(CP, "1 < p < 2"))
        assert set_equal(a.union(b), ConstraintSet.universe(CP))

    def test_includes_convex_and_split(self):
        big = cset(CP, "p < 3")
        small = cset(CP, "(p > 2 && p < 3) || (1 < p < 3/2)")
        assert big.includes(small)
        assert not small.includes(big)

    def test_includes_needs_union_reasoning(self):
        # Neither half covers [0, 2] alone; together they do
        halves = cset(CP, "p <= 1 || (p >= 1 && p <= 2)")
        assert halves.includes(cset(CP, "p <= 2"))

    def test_piece_absorption(self):
        s = cset(CP, "p < 2 || p < 1")
        assert len(s.pieces) == 1

    def test_two_param_complement(self):
        bad = cset(CPN, "p >= n && p < 1")
        good = bad.negate()
        expected = cset(CPN, "n > p || p >= 1")
        assert set_equal(good, expected)


class TestValuations:
    def test_satisfies_exact_boundaries(self):
        s = cset(CP, "(p > 2 && p < 3) || (1 < p < 3/2)")
        assert s.satisfies({"p": Fraction(11, 5)})
        assert not s.satisfies({"p": 2})
        assert not s.satisfies({"p": Fraction(3, 2)})
        assert s.satisfies({"p": Fraction(149, 100)})

    def test_instantiate_parameter(self):
        p = poly(CXYP, "y - x = p && y < 3")
        q = p.instantiate({"p": Fraction(3, 2)})
        assert q.ctx.params == ()
        assert q.satisfies({"x": 0, "y": Fraction(3, 2)})
        assert not q.satisfies({"x": 0, "y": 1})

    def test_parse_valuation(self):
        v = parse_valuation("p=9/10, n = 2")
        assert v == {"p": Fraction(9, 10), "n": Fraction(2)}


class TestTextForms:
    def test_single_variable_atoms_use_unit_coefficient(self):
        # The nonredundant domain atom stays; the bound prints with a
        # unit coefficient and a rational right-hand side.
        assert str(poly(CP, "2 p < 3")) == "p >= 0 && p < 3/2"

    def test_multi_variable_atoms_stay_integer(self):
        p = poly(CXYP, "2 x - 3 y <= 5 && y >= 1")
        assert "2 x - 3 y <= 5" in str(p)

    def test_atom_json_exact_rationals(self):
        from ptasynth.constraints import atom_json

        a = parse_atoms(CP, "2 p < 3")[0]
        assert atom_json(CP, a) == {"coeffs": {"p": "1"}, "rel": "<", "const": "3/2"}

    def test_empty_and_universe_text(self):
        assert str(ConstraintSet.empty(CP)) == "false"
        assert str(ConstraintSet.universe(CP)) == "p >= 0"

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_atoms(CP, "p << 1")
        with pytest.raises(KeyError):
            parse_atoms(CP, "q < 1")
        with pytest.raises(ValueError):
            parse_atoms(CP, "p +")
