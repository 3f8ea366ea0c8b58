import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lossgraph.errors import NotDecomposable, ParseError, TooLarge
from lossgraph.graphs import (
    Graph,
    can_add,
    can_delete,
    enumerate_decomposable,
    format_edge_list,
    is_decomposable,
    junction_tree,
    legal_edge_moves,
    max_decomposable_subgraph,
    min_fill_triangulation,
    parse_edge_list,
    to_dot,
)

from conftest import all_graphs, brute_force_chordal, random_chordal, random_graph


def path(*vs):
    return [(a - 1, b - 1) for a, b in zip(vs, vs[1:])]


FOUR_CYCLE = Graph(4, path(1, 2, 3, 4) + [(0, 3)])


@st.composite
def graphs(draw, max_p=8):
    p = draw(st.integers(1, max_p))
    pairs = list(itertools.combinations(range(p), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(p, [e for e, keep in zip(pairs, mask) if keep])


class TestGraph:
    def test_edges_canonical(self):
        g = Graph(4, [(2, 0), (3, 1), (0, 2)])
        assert g.edges == ((0, 2), (1, 3))
        assert g.k == 2 and g.m == 6

    def test_equality_and_hash(self):
        a = Graph(3, [(0, 1), (1, 2)])
        b = Graph(3, [(2, 1), (1, 0)])
        assert a == b and hash(a) == hash(b)
        assert a != Graph(4, [(0, 1), (1, 2)])

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Graph(3, [(1, 1)])

    def test_toggle_roundtrip(self):
        g = Graph(5, [(0, 1)])
        h = g.toggle(2, 4)
        assert h.k == 2 and h.toggle(2, 4) == g


class TestIsDecomposable:
    def test_triangle(self):
        assert is_decomposable(Graph.complete(3))

    def test_four_cycle(self):
        assert not is_decomposable(FOUR_CYCLE)

    def test_all_p4_agree_with_cycle_oracle(self):
        graphs_ = list(all_graphs(4))
        assert len(graphs_) == 64
        for g in graphs_:
            assert is_decomposable(g) == brute_force_chordal(g)

    def test_p5_agree_with_cycle_oracle(self):
        for g in all_graphs(5):
            assert is_decomposable(g) == brute_force_chordal(g)

    @settings(max_examples=200, deadline=None)
    @given(graphs(max_p=10))
    def test_agrees_with_networkx(self, g):
        nxg = nx.Graph()
        nxg.add_nodes_from(range(g.p))
        nxg.add_edges_from(g.edges)
        assert is_decomposable(g) == nx.is_chordal(nxg)


class TestJunctionTree:
    def test_path(self):
        jt = junction_tree(Graph(3, path(1, 2, 3)))
        assert sorted(jt.clique_sets) == [(0, 1), (1, 2)]
        assert jt.separator_sets == [(1,)]

    def test_complete(self):
        jt = junction_tree(Graph.complete(5))
        assert jt.clique_sets == [(0, 1, 2, 3, 4)]
        assert jt.separators == ()

    def test_not_decomposable(self):
        with pytest.raises(NotDecomposable):
            junction_tree(FOUR_CYCLE)

    def test_disconnected_has_empty_separator(self):
        jt = junction_tree(Graph(4, [(0, 1), (2, 3)]))
        assert sorted(jt.clique_sets) == [(0, 1), (2, 3)]
        assert jt.separators == (0,)

    def test_running_intersection_and_accounting(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            p = int(rng.integers(1, 9))
            g = random_chordal(rng, p)
            jt = junction_tree(g)
            assert len(jt.separators) == len(jt.cliques) - 1
            union = 0
            for i, c in enumerate(jt.cliques):
                # each clique is complete and maximal
                vs = [v for v in range(p) if c >> v & 1]
                assert all(g.has_edge(a, b) for a, b in itertools.combinations(vs, 2))
                assert not any(all(g.has_edge(v, w) for v in vs) for w in range(p) if not c >> w & 1)
                if i:
                    s = c & union
                    assert s == jt.separators[i - 1]
                    parent, child = jt.tree_edges[i - 1]
                    assert child == i and parent < i and s & ~jt.cliques[parent] == 0
                union |= c
            assert union == (1 << p) - 1
            assert sum(c.bit_count() for c in jt.cliques) - sum(s.bit_count() for s in jt.separators) == p

    def test_cliques_match_networkx(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            g = random_chordal(rng, int(rng.integers(2, 9)))
            nxg = nx.Graph()
            nxg.add_nodes_from(range(g.p))
            nxg.add_edges_from(g.edges)
            expected = sorted(tuple(sorted(c)) for c in nx.find_cliques(nxg))
            assert sorted(junction_tree(g).clique_sets) == expected

    def test_separator_multiset_invariant_under_relabeling(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            p = int(rng.integers(2, 7))
            g = random_chordal(rng, p)
            perm = rng.permutation(p)
            base = sorted(len(s) for s in junction_tree(g).separator_sets)
            jt2 = junction_tree(g.relabel(perm))
            assert sorted(len(s) for s in jt2.separator_sets) == base
            inv = np.argsort(perm)
            back = sorted(tuple(sorted(int(inv[v]) for v in s)) for s in jt2.separator_sets)
            assert back == sorted(junction_tree(g).separator_sets)


class TestLegalMoves:
    def test_complete_p3(self):
        adds, dels = legal_edge_moves(Graph.complete(3))
        assert adds == [] and dels == [(0, 1), (0, 2), (1, 2)]

    def test_empty_p4(self):
        adds, dels = legal_edge_moves(Graph.empty(4))
        assert len(adds) == 6 and dels == []

    @pytest.mark.parametrize("p", [2, 3, 4, 5])
    def test_exhaustive_toggle_oracle(self, p):
        for g in enumerate_decomposable(p):
            adds, dels = legal_edge_moves(g)
            listed = set(adds) | set(dels)
            for i, j in itertools.combinations(range(p), 2):
                ok = brute_force_chordal(g.toggle(i, j))
                assert ok == ((i, j) in listed), (g, i, j)

    def test_fast_tests_match_junction_tree_lists(self):
        for g in enumerate_decomposable(5):
            adds, dels = legal_edge_moves(g)
            assert dels == [e for e in g.edges if can_delete(g.adj, *e)]
            assert adds == [
                (i, j) for i, j in itertools.combinations(range(5), 2)
                if not g.has_edge(i, j) and can_add(g.adj, i, j)
            ]


class TestTriangulation:
    def test_decomposable_unchanged(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            g = random_chordal(rng, int(rng.integers(1, 8)))
            assert min_fill_triangulation(g) == g

    def test_four_cycle_one_chord(self):
        h = min_fill_triangulation(FOUR_CYCLE)
        assert h.k == 5 and is_decomposable(h) and FOUR_CYCLE.is_subgraph_of(h)

    @settings(max_examples=200, deadline=None)
    @given(graphs(max_p=7))
    def test_supergraph_property(self, g):
        h = min_fill_triangulation(g)
        assert brute_force_chordal(h) and g.is_subgraph_of(h)


class TestMaxSubgraph:
    def test_decomposable_unchanged(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            g = random_chordal(rng, int(rng.integers(1, 8)))
            assert max_decomposable_subgraph(g, {}) == g

    def test_four_cycle_keeps_three(self):
        h = max_decomposable_subgraph(FOUR_CYCLE, {e: 0.5 for e in FOUR_CYCLE.edges})
        assert h.k == 3 and is_decomposable(h)

    def test_lowest_score_removed(self):
        scores = {e: 0.9 for e in FOUR_CYCLE.edges}
        scores[(1, 2)] = 0.1
        h = max_decomposable_subgraph(FOUR_CYCLE, scores)
        assert not h.has_edge(1, 2) and h.k == 3

    @settings(max_examples=200, deadline=None)
    @given(graphs(max_p=7))
    def test_subgraph_property(self, g):
        h = max_decomposable_subgraph(g, {e: 0.5 for e in g.edges})
        assert brute_force_chordal(h) and h.is_subgraph_of(g)


class TestEnumerate:
    def test_small_counts(self):
        assert len(enumerate_decomposable(2)) == 2
        assert len(enumerate_decomposable(3)) == 8

    def test_p4_matches_oracle_count(self):
        expected = sum(brute_force_chordal(g) for g in all_graphs(4))
        got = enumerate_decomposable(4)
        assert len(got) == expected == 61
        assert len(set(got)) == len(got)

    def test_known_counts(self):
        # labelled chordal graphs: 822 on 5 vertices, 18154 on 6
        assert len(enumerate_decomposable(5)) == 822
        assert len(enumerate_decomposable(6)) == 18154

    def test_too_large(self):
        with pytest.raises(TooLarge):
            enumerate_decomposable(7)


def test_relabeling_commutes():
    rng = np.random.default_rng(5)
    for _ in range(200):
        p = int(rng.integers(2, 8))
        g = random_graph(rng, p)
        perm = [int(v) for v in rng.permutation(p)]
        h = g.relabel(perm)
        assert is_decomposable(g) == is_decomposable(h)
        if is_decomposable(g):
            a1, d1 = legal_edge_moves(g)
            a2, d2 = legal_edge_moves(h)
            relab = lambda es: sorted(tuple(sorted((perm[i], perm[j]))) for i, j in es)
            assert relab(a1) == sorted(a2) and relab(d1) == sorted(d2)


class TestFormats:
    def test_edge_list_roundtrip(self):
        g = Graph(6, [(0, 1), (2, 5), (3, 4)])
        text = format_edge_list(g)
        assert text.splitlines()[0] == "1 2"
        assert parse_edge_list(text, p=6) == g

    def test_declared_p_and_comments(self):
        g = parse_edge_list("# header\np 5\n1 2  # an edge\n\n")
        assert g.p == 5 and g.edges == ((0, 1),)

    def test_parse_error_has_line(self):
        with pytest.raises(ParseError, match="row 2"):
            parse_edge_list("1 2\n1 x\n")

    def test_dot_isolated(self):
        dot = to_dot(Graph.empty(3))
        assert dot.count("label=") == 3 and "--" not in dot
