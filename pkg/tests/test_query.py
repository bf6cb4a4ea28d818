import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import CUBE_QUERY, CYCLIC_QUERY, FLIGHTS_QUERY, random_db, random_join_tree_query
from paramshap.data import Database
from paramshap.errors import InputError, QueryParseError
from paramshap.evaluation import evaluate
from paramshap.hypergraph import is_p_acyclic
from paramshap.query import (
    Const,
    LinExpr,
    Param,
    Var,
    ground,
    intersect_with_reference,
    parse_query,
)


class TestParser:
    def test_flights_query(self):
        q = parse_query(FLIGHTS_QUERY)
        assert q.free == ("x", "tdep", "tarr")
        assert q.params == ("d", "c")
        assert q.atoms[0].terms[3] == Const("CDG")
        assert q.atoms[1].terms == (Var("a"), Param("c"))
        assert q.ell == 2 and not q.is_full and q.bound == ("a",)

    def test_filters_and_rationals(self):
        q = parse_query("Q(x; $y) :- R(x, z), [2*x + 1/2 <= $y - z], [$y != 3]")
        f = q.filters[0]
        assert f.op == "<="
        assert f.arity == 3
        assert f.holds({"x": 1, "$y": 5, "z": 1})
        assert not f.holds({"x": 2, "$y": 5, "z": 1})
        assert Fraction(1, 2) in (f.lhs.constant, -f.rhs.constant)

    def test_switch_filter(self):
        q = parse_query("Q(x; $s) :- R(x), [$s => x < 3]")
        f = q.filters[0]
        assert f.switch == Param("s")
        assert f.holds({"x": 5, "$s": 0})
        assert not f.holds({"x": 5, "$s": 1})
        assert f.holds({"x": 1, "$s": 1})

    def test_comments_and_period(self):
        q = parse_query("# a comment\nQ(x;) :- R(x, 1).\n")
        assert q.atoms[0].terms == (Var("x"), Const(1))

    def test_string_and_bool_constants(self):
        q = parse_query('Q(;) :- R("a b", true, -3)')
        assert q.atoms[0].terms == (Const("a b"), Const(True), Const(-3))
        assert q.is_boolean

    @pytest.mark.parametrize(
        "text, fragment",
        [
            ("Q(x;) :- [x < 1]", "does not occur"),
            ("Q(x;) :- R(x), [y < 1]", "unguarded"),
            ("Q(x;) :- R(y)", "head variable x"),
            ("Q(x; $y) :- R(x, $z)", "not declared"),
            ("Q(x; $y, $y) :- R(x, $y)", "duplicate parameter"),
            ("Q(x; y) :- R(x, y)", "expected parameter"),
            ("Q(x;) :- R(x) S(x)", "unexpected"),
            ("Q(x;) :- R(x), [x * x < 1]", "not linear"),
            ("Q(x;) :- R(x), [x ~ 1]", "unexpected character"),
            ("Q(x;) :- R(x), [x + \"a\" < 1]", "non-numeric"),
            ("Q(x;) :- R(x, 1/0)", "zero denominator"),
            ("Q(x;) :- R(x", "expected"),
        ],
    )
    def test_errors(self, text, fragment):
        with pytest.raises(QueryParseError, match=fragment):
            parse_query(text)

    def test_error_position(self):
        with pytest.raises(QueryParseError) as info:
            parse_query("Q(x;) :- R(x) ~")
        assert info.value.position == 14

    @pytest.mark.parametrize("text", [CUBE_QUERY, CYCLIC_QUERY, FLIGHTS_QUERY,
                                      "Q(x; $y) :- R(x, z), [2*x + 1/2 <= $y - z], [$y => x != -1]"])
    def test_print_parse_round_trip(self, text):
        q = parse_query(text)
        assert parse_query(str(q)) == q

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_round_trip_random(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 4), rng.randint(0, 3), full=rng.random() < 0.5)
        assert parse_query(str(q)) == q


class TestGround:
    def test_ground_substitutes(self):
        q = parse_query("Q(x; $y) :- R(x, $y), [x < $y]")
        g = ground(q, (3,))
        assert g.params == ()
        assert g.atoms[0].terms == (Var("x"), Const(3))
        assert g.filters[0].rhs == LinExpr((), 3)

    def test_true_constant_filter_dropped(self):
        q = parse_query("Q(x; $y) :- R(x), [$y < 3]")
        assert ground(q, (1,)).filters == ()
        assert len(ground(q, (5,)).filters) == 1

    def test_wrong_length(self):
        q = parse_query(CUBE_QUERY)
        with pytest.raises(InputError, match="length"):
            ground(q, (1,))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_ground_matches_valuations(self, seed):
        """Grounding equals filtering the ungrounded join by parameter values."""
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 3), rng.randint(1, 3), full=True)
        db = random_db(rng, q, domain=(1, 2), max_tuples=5)
        p = tuple(rng.choice((1, 2)) for _ in q.params)
        got = evaluate(ground(q, p), db).tuples
        expected = set()
        for a_rows in itertools.product(*(db[a.relation].tuples for a in q.atoms)):
            val = {"$" + n: v for n, v in zip(q.params, p)}
            ok = True
            for atom, row in zip(q.atoms, a_rows):
                for t, x in zip(atom.terms, row):
                    k = t.key
                    if val.setdefault(k, x) != x:
                        ok = False
            if ok:
                expected.add(tuple(val[v] for v in q.free))
        assert got == expected


class TestIntersectWithReference:
    @pytest.mark.parametrize("seed", range(20))
    def test_semantics_and_acyclicity(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 4), rng.randint(1, 3), full=True)
        db = random_db(rng, q, domain=(1, 2), max_tuples=6)
        p_star = tuple(rng.choice((1, 2)) for _ in q.params)
        cap = intersect_with_reference(q, p_star)
        assert is_p_acyclic(cap)
        for p in itertools.product((1, 2), repeat=q.ell):
            lhs = evaluate(ground(cap, p), db).tuples
            rhs = evaluate(ground(q, p), db).tuples & evaluate(ground(q, p_star), db).tuples
            assert lhs == rhs

    def test_preconditions(self):
        with pytest.raises(InputError, match="filter-free"):
            intersect_with_reference(parse_query("Q(x; $y) :- R(x, $y), [x < 1]"), (1,))
        with pytest.raises(InputError, match="not full"):
            intersect_with_reference(parse_query("Q(x; $y) :- R(x, z, $y)"), (1,))
        with pytest.raises(InputError, match="p-acyclic"):
            intersect_with_reference(parse_query("Q(x, z; $y) :- R(x, $y), S($y, z), T(z, x)"), (1,))


class TestAnalysis:
    def test_null_parameters(self):
        q = parse_query("Q(x; $a, $b, $c) :- R(x, $a), [x < $c]")
        assert q.null_parameters() == ["b"]
        assert q.param_index("c") == 2

    def test_filter_arity_bound(self):
        q = parse_query("Q(x; $a) :- R(x, y, z), [x + y + z < $a]")
        q.validate(4)
        with pytest.raises(InputError, match="arity 4 > bound 3"):
            q.validate(3)
