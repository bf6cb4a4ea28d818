import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_db, random_factorized, random_inequality_filters, random_join_tree_query
from paramshap.data import Database
from paramshap.distributions import FactorizedDistribution
from paramshap.errors import BudgetExceeded, InputError, PreconditionError
from paramshap.evaluation import (
    count_answers,
    evaluate,
    expected_count,
    materialize_filters,
    variable_domains,
    weighted_count,
)
from paramshap.query import ground, parse_query


def brute_weighted(q, db, weights):
    """Sum over all answers (parameters included as columns) of weight products."""
    keys = [v for a in q.atoms for v in a.vertices()]
    keys = list(dict.fromkeys(keys))
    total = Fraction(0)
    seen = set()
    for rows in itertools.product(*(db[a.relation].tuples for a in q.atoms)):
        val = {}
        ok = True
        for atom, row in zip(q.atoms, rows):
            for t, x in zip(atom.terms, row):
                if hasattr(t, "key"):
                    if val.setdefault(t.key, x) != x:
                        ok = False
                elif t.value != x:
                    ok = False
        if not ok:
            continue
        tup = tuple(val[k] for k in keys)
        if tup in seen:
            continue
        seen.add(tup)
        w = Fraction(1)
        for k in keys:
            if k in weights:
                w *= weights[k].get(val[k], 0)
        total += w
    return total


class TestEvaluate:
    def test_projection_and_constants(self):
        db = Database.from_dict({"R": [(1, "a"), (2, "b"), (3, "a")], "S": [("a", 10), ("b", 20)]})
        q = parse_query('Q(x;) :- R(x, z), S(z, 10)')
        assert evaluate(q, db).tuples == {(1,), (3,)}

    def test_repeated_variable(self):
        db = Database.from_dict({"R": [(1, 1), (1, 2)]})
        assert evaluate(parse_query("Q(x;) :- R(x, x)"), db).tuples == {(1,)}

    def test_filters(self):
        db = Database.from_dict({"R": [(1, 2), (2, 2), (3, 1)]})
        q = parse_query("Q(x, y;) :- R(x, y), [x < y]")
        assert evaluate(q, db).tuples == {(1, 2)}

    def test_boolean(self):
        db = Database.from_dict({"R": [(1,)]})
        assert evaluate(parse_query("Q(;) :- R(1)"), db).tuples == {()}
        assert evaluate(parse_query("Q(;) :- R(2)"), db).tuples == set()

    def test_parameters_rejected(self):
        db = Database.from_dict({"R": [(1, 2)]})
        with pytest.raises(InputError):
            evaluate(parse_query("Q(x; $y) :- R(x, $y)"), db)

    def test_budget(self):
        db = Database.from_dict({"R": [(i,) for i in range(50)], "S": [(i,) for i in range(50)]})
        with pytest.raises(BudgetExceeded):
            evaluate(parse_query("Q(x, y;) :- R(x), S(y)"), db, budget=100)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_yannakakis_matches_generic(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 4), 0, full=rng.random() < 0.5)
        db = random_db(rng, q, domain=(1, 2, 3), max_tuples=8)
        assert evaluate(q, db, method="yannakakis").tuples == evaluate(q, db, method="generic").tuples

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_filters_auto_matches_generic(self, seed):
        rng = random.Random(seed)
        q = random_inequality_filters(rng, random_join_tree_query(rng, rng.randint(1, 3), 0))
        db = random_db(rng, q, domain=(1, 2, 3), max_tuples=8)
        assert evaluate(q, db).tuples == evaluate(q, db, method="generic").tuples


class TestWeightedCount:
    def test_worked(self):
        db = Database.from_dict({"R": [(1,), (2,)]})
        q = parse_query("Q(x;) :- R(x)")
        assert weighted_count(q, db, {"x": {1: Fraction(1, 3), 2: Fraction(1, 2)}}) == Fraction(5, 6)

    def test_count_answers(self):
        db = Database.from_dict({"R": [(1, 1), (1, 2), (2, 3)], "S": [(1,), (2,), (3,)]})
        q = parse_query("Q(x, y;) :- R(x, y), S(y)")
        assert count_answers(q, db) == 3

    def test_preconditions(self):
        db = Database.from_dict({"R": [(1, 1)], "S": [(1, 1)], "T": [(1, 1)]})
        with pytest.raises(PreconditionError, match="full"):
            weighted_count(parse_query("Q(x;) :- R(x, y)"), db)
        with pytest.raises(PreconditionError, match="acyclic"):
            weighted_count(parse_query("Q(x, y, z;) :- R(x, y), S(y, z), T(z, x)"), db)
        with pytest.raises(PreconditionError, match="filter-free"):
            weighted_count(parse_query("Q(x, y;) :- R(x, y), [x < y]"), db)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_join_tree_dp_matches_enumeration(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 5), rng.randint(0, 3))
        db = random_db(rng, q, domain=(1, 2, 3), max_tuples=6)
        weights = {}
        for a in q.atoms:
            for v in a.vertices():
                if rng.random() < 0.6:
                    weights[v] = {x: Fraction(rng.randint(0, 3), rng.randint(1, 3)) for x in (1, 2, 3)}
        assert weighted_count(q, db, weights) == brute_weighted(q, db, weights)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_expected_count(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 4), rng.randint(1, 3))
        db = random_db(rng, q, domain=(1, 2), max_tuples=6)
        g = random_factorized(rng, q.ell, domain=(1, 2, 3))
        want = sum(g.prob(p) * len(evaluate(ground(q, p), db)) for p in g.support())
        assert expected_count(q, db, g) == want


class TestMaterialize:
    def test_worked(self):
        db = Database.from_dict({"R": [(1,), (2,), (3,)]})
        q = parse_query("Q(x; $T) :- R(x), [x <= $T]")
        g = FactorizedDistribution([{2: 1}])
        m = materialize_filters(q, db, g)
        rel = m.database[m.filter_relations[0]]
        assert rel.tuples == {(1, 2), (2, 2)}
        assert m.query.filters == ()

    def test_domains_intersect(self):
        db = Database.from_dict({"R": [(1,), (2,), (3,)], "S": [(2,), (3,), (4,)]})
        q = parse_query("Q(x;) :- R(x), S(x)")
        assert variable_domains(q, db)["x"] == {2, 3}

    def test_name_collision(self):
        db = Database.from_dict({"F0": [(1,), (2,)]})
        q = parse_query("Q(x;) :- F0(x), [x < 2]")
        m = materialize_filters(q, db, FactorizedDistribution([]))
        assert m.filter_relations == ("_F0",)

    def test_arity_bound(self):
        db = Database.from_dict({"R": [(1, 1, 1, 1, 1)]})
        q = parse_query("Q(a, b, c, d, e;) :- R(a, b, c, d, e), [a + b + c + d < e]")
        with pytest.raises(InputError, match="arity 5 > bound 4"):
            materialize_filters(q, db, FactorizedDistribution([]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_preserves_answers(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 3), rng.randint(1, 3))
        q = random_inequality_filters(rng, q)
        db = random_db(rng, q, domain=(1, 2), max_tuples=6)
        g = random_factorized(rng, q.ell, domain=(1, 2, 3))
        m = materialize_filters(q, db, g)
        for p in g.support():
            assert evaluate(ground(m.query, p), m.database).tuples == evaluate(ground(q, p), db).tuples
