import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import CYCLIC_QUERY, FLIGHTS_QUERY, random_join_tree_query
from paramshap.hypergraph import Hypergraph, gyo_reduce, hypergraph, is_acyclic, is_p_acyclic
from paramshap.query import parse_query


def hg(*edges):
    return Hypergraph.from_edges([(f"e{k}", vs) for k, vs in enumerate(edges)])


class TestGyo:
    def test_path_is_acyclic(self):
        r = gyo_reduce(hg("ab", "bc", "cd"))
        assert r.acyclic
        assert r.join_tree.has_running_intersection()

    def test_triangle_is_cyclic(self):
        r = gyo_reduce(hg("ab", "bc", "ca"))
        assert not r.acyclic
        assert set(r.residual) == {"e0", "e1", "e2"}

    def test_triangle_with_cover_is_acyclic(self):
        assert is_acyclic(hg("ab", "bc", "ca", "abc"))

    def test_disconnected(self):
        r = gyo_reduce(hg("ab", "cd", "ef"))
        assert r.acyclic
        t = r.join_tree
        assert sum(p is None for p in t.parent) == 1
        assert t.has_running_intersection()

    def test_lowest_index_ear_and_superset_parent(self):
        r = gyo_reduce(hg("ab", "abc", "c"))
        t = r.join_tree
        # e0 is removed first and is contained in e1
        assert t.parent[0] == 1

    def test_empty(self):
        assert gyo_reduce(Hypergraph.from_edges([])).acyclic

    def test_bottom_up_order(self):
        t = gyo_reduce(hg("ab", "bc", "cd", "de")).join_tree
        order = t.bottom_up()
        seen = set()
        for n in order:
            for c in t.children[n]:
                assert c in seen
            seen.add(n)
        assert order[-1] == t.root

    def test_weight_nodes_each_vertex_once(self):
        t = gyo_reduce(hg("ab", "bc", "cd")).join_tree
        w = t.weight_nodes()
        assert set(w) == set("abcd")
        for v, n in w.items():
            assert v in t.node_vertices[n]


class TestQueries:
    def test_flights_p_acyclic(self):
        assert is_p_acyclic(parse_query(FLIGHTS_QUERY))

    def test_cyclic_query_not_p_acyclic(self):
        q = parse_query(CYCLIC_QUERY)
        assert not is_p_acyclic(q)
        # without parameters the three atoms do form an acyclic hypergraph
        assert is_acyclic(hypergraph(q, include_parameters=False))

    def test_filter_edges_count(self):
        q = parse_query("Q(x, y;) :- R(x), S(y), [x < y]")
        assert is_acyclic(hypergraph(q, filters_as_edges=False))
        assert is_p_acyclic(q)
        q2 = parse_query("Q(x, y, z;) :- R(x, y), S(y, z), [x < z]")
        assert not is_p_acyclic(q2)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6))
    def test_generated_join_trees(self, seed):
        rng = random.Random(seed)
        q = random_join_tree_query(rng, rng.randint(1, 6), rng.randint(0, 4))
        r = gyo_reduce(hypergraph(q))
        assert r.acyclic
        assert r.join_tree.has_running_intersection()

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.sets(st.sampled_from("abcde"), min_size=1, max_size=3), min_size=1, max_size=5))
    def test_tree_iff_acyclic(self, edges):
        """A reduction that succeeds always yields a valid join tree; a
        failure leaves a residual of at least three edges."""
        r = gyo_reduce(hg(*edges))
        if r.acyclic:
            assert r.join_tree.has_running_intersection()
        else:
            assert len(r.residual) >= 3
